//! Minimum-weight perfect matching over the decomposed detector error model,
//! with a logical and a trivial boundary node per basis so that ambiguous
//! half-distance matchings can be post-selected away.
//!
//! The ambiguity check runs per observable `j`. Detector potentials first
//! move every internal flip of `j` onto the boundary (multiplying `j` by
//! detectors, which the syndrome fixes). Boundary edges that then flip `j`
//! are merged into one extra vertex, and flagging that vertex or not selects
//! the matchings that predict `j` flipped or unflipped. With a single
//! observable and one defect this is the usual logical-versus-trivial
//! boundary comparison.
//!
//! Decoding reduces each shot to the complete graph on its flagged detectors
//! (shortest-path distances, precomputed once per graph) and solves that
//! exactly with the blossom matcher.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::blossom::min_weight_perfect_matching;
use crate::circuit::Basis;
use crate::dem::{merge_probability, DetectorErrorModel};
use crate::error::{Error, Result};
use crate::flow::ObsLabel;

/// Weights are fixed-point with this many units per nat.
const SCALE: f64 = 1e6;
const UNREACHABLE: i64 = i64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    Detector(usize),
    Logical,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub u: Node,
    pub v: Node,
    pub weight: f64,
    pub observable_flips: Vec<ObsLabel>,
    pub edge_prob: f64,
}

/// Which boundaries a defect may be absorbed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Both,
    LogicalOnly,
    TrivialOnly,
}

impl BoundaryMode {
    fn allows(self, mask: u64) -> bool {
        match self {
            BoundaryMode::Both => true,
            BoundaryMode::LogicalOnly => mask != 0,
            BoundaryMode::TrivialOnly => mask == 0,
        }
    }
}

/// How two constrained matchings are compared for ambiguity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ambiguity {
    /// Equal numbers of graph edges along the matched paths.
    #[default]
    EdgeCount,
    /// Equal total weights (within 1e-9 nats per matched pair).
    Weight,
}

#[derive(Debug, Clone, Copy)]
struct Path {
    dist: i64,
    hops: u32,
    mask: u64,
}

const NO_PATH: Path = Path {
    dist: UNREACHABLE,
    hops: 0,
    mask: 0,
};

impl Path {
    fn better_than(&self, other: &Path) -> bool {
        (self.dist, self.hops) < (other.dist, other.hops)
    }
}

/// Decoding graph of one basis.
#[derive(Debug, Clone)]
pub struct BasisGraph {
    pub basis: Basis,
    /// Global detector ids of the nodes, ascending.
    pub detectors: Vec<usize>,
    /// Edges sorted by endpoints.
    pub edges: Vec<GraphEdge>,
    pair: Vec<Path>,
    /// Distinct observable masks of the boundary edges, 0 first when present.
    classes: Vec<u64>,
    /// `to_class[c][i]`: best path from node `i` out through a class-`c` edge.
    to_class: Vec<Vec<Path>>,
    /// Observables flipped by some edge of this graph.
    pub observables: Vec<usize>,
    /// Parallel to `observables`; `None` when internal edges flip the
    /// observable around a closed loop, so no potential exists.
    sides: Vec<Option<Sides>>,
}

#[derive(Debug, Clone)]
struct Sides {
    phi: Vec<bool>,
    /// `to[b][i]`: best path from `i` out through a boundary edge whose flip
    /// of the observable, corrected by the potential, is `b`.
    to: [Vec<Path>; 2],
}

fn sides_for(j: usize, adj: &[Vec<(usize, i64, u64)>], bound: &[Vec<(Node, i64, u64)>]) -> Option<Sides> {
    let n = adj.len();
    let mut phi: Vec<Option<bool>> = vec![None; n];
    for root in 0..n {
        if phi[root].is_some() {
            continue;
        }
        phi[root] = Some(false);
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            let pu = phi[u].unwrap();
            for &(v, _, m) in &adj[u] {
                let want = pu ^ (m >> j & 1 == 1);
                match phi[v] {
                    None => {
                        phi[v] = Some(want);
                        stack.push(v);
                    }
                    Some(x) if x != want => return None,
                    Some(_) => {}
                }
            }
        }
    }
    let phi: Vec<bool> = phi.into_iter().map(|x| x.unwrap()).collect();
    let side = |b: bool| {
        let mut to = vec![NO_PATH; n];
        let mut heap = BinaryHeap::new();
        for k in 0..n {
            for &(_, w, m) in &bound[k] {
                let cand = Path { dist: w, hops: 1, mask: m };
                if ((m >> j & 1 == 1) ^ phi[k]) == b && cand.better_than(&to[k]) {
                    to[k] = cand;
                }
            }
            if to[k].dist != UNREACHABLE {
                heap.push(Item(to[k].dist, to[k].hops, k));
            }
        }
        let mut done = vec![false; n];
        while let Some(Item(dist, hops, u)) = heap.pop() {
            if done[u] || dist != to[u].dist || hops != to[u].hops {
                continue;
            }
            done[u] = true;
            for &(v, w, m) in &adj[u] {
                let cand = Path {
                    dist: dist + w,
                    hops: hops + 1,
                    mask: to[u].mask ^ m,
                };
                if !done[v] && cand.better_than(&to[v]) {
                    to[v] = cand;
                    heap.push(Item(cand.dist, cand.hops, v));
                }
            }
        }
        to
    };
    Some(Sides {
        to: [side(false), side(true)],
        phi,
    })
}

#[derive(Debug, Clone)]
pub struct MatchingGraph {
    pub observables: Vec<ObsLabel>,
    pub graphs: Vec<BasisGraph>,
    /// Global detector id -> (graph, local node).
    locate: Vec<(usize, usize)>,
    pub warnings: Vec<String>,
}

/// Matching of one basis under one boundary mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatching {
    pub weight: f64,
    pub edge_count: usize,
    pub mask: u64,
    pub pairs: Vec<(Node, Node)>,
}

/// Ambiguity check of one observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDiagnostics {
    pub basis: Basis,
    pub observable: ObsLabel,
    pub logical_matching_size: Option<usize>,
    pub trivial_matching_size: Option<usize>,
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Bit `j` is set when observable `j` of the graph is predicted flipped.
    pub predicted_mask: u64,
    pub predicted_flips: Vec<ObsLabel>,
    pub matched_edges: Vec<(Node, Node)>,
    pub weight: f64,
    pub keep: bool,
    pub diagnostics: Vec<BasisDiagnostics>,
}

impl DecodeResult {
    /// Per-observable verdict: `label` itself was not ambiguous.
    pub fn keep_for(&self, label: ObsLabel) -> bool {
        self.diagnostics.iter().filter(|d| d.observable == label).all(|d| !d.ambiguous)
    }
}

/// Edge weight ln((1-q)/q), clamped to 0 for q >= 1/2.
pub fn edge_weight(q: f64) -> f64 {
    if q >= 0.5 {
        0.0
    } else {
        ((1.0 - q) / q).ln()
    }
}

fn to_fixed(w: f64) -> i64 {
    (w * SCALE).round() as i64
}

#[derive(PartialEq, Eq)]
struct Item(i64, u32, usize);

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        (o.0, o.1, o.2).cmp(&(self.0, self.1, self.2))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl BasisGraph {
    fn new(basis: Basis, detectors: Vec<usize>, edges: Vec<GraphEdge>, masks: &[u64], global_local: &[(usize, usize)]) -> Self {
        let n = detectors.len();
        let local = |node: Node| match node {
            Node::Detector(d) => Some(global_local[d].1),
            _ => None,
        };
        // Adjacency among detectors; boundary edges kept per node.
        let mut adj: Vec<Vec<(usize, i64, u64)>> = vec![Vec::new(); n];
        let mut bound: Vec<Vec<(Node, i64, u64)>> = vec![Vec::new(); n];
        for (e, &m) in edges.iter().zip(masks) {
            let w = to_fixed(e.weight);
            match (local(e.u), local(e.v)) {
                (Some(a), Some(b)) => {
                    adj[a].push((b, w, m));
                    adj[b].push((a, w, m));
                }
                (Some(a), None) => bound[a].push((e.v, w, m)),
                (None, Some(b)) => bound[b].push((e.u, w, m)),
                (None, None) => {}
            }
        }

        let mut classes: Vec<u64> = bound.iter().flatten().map(|b| b.2).collect();
        classes.sort();
        classes.dedup();
        let observables: Vec<usize> = (0..64).filter(|j| masks.iter().any(|m| m >> j & 1 == 1)).collect();
        let mut pair = vec![NO_PATH; n * n];
        let mut to_class = vec![vec![NO_PATH; n]; classes.len()];
        let mut heap = BinaryHeap::new();
        for s in 0..n {
            let row = &mut pair[s * n..(s + 1) * n];
            row[s] = Path { dist: 0, hops: 0, mask: 0 };
            heap.push(Item(0, 0, s));
            let mut done = vec![false; n];
            while let Some(Item(dist, hops, u)) = heap.pop() {
                if done[u] || dist != row[u].dist || hops != row[u].hops {
                    continue;
                }
                done[u] = true;
                let here = row[u];
                for &(node, w, m) in &bound[u] {
                    let cand = Path {
                        dist: dist + w,
                        hops: hops + 1,
                        mask: here.mask ^ m,
                    };
                    debug_assert_eq!(node == Node::Logical, m != 0);
                    let c = classes.binary_search(&m).expect("boundary class");
                    let slot = &mut to_class[c][s];
                    if cand.better_than(slot) {
                        *slot = cand;
                    }
                }
                for &(v, w, m) in &adj[u] {
                    let cand = Path {
                        dist: dist + w,
                        hops: hops + 1,
                        mask: here.mask ^ m,
                    };
                    if !done[v] && cand.better_than(&row[v]) {
                        row[v] = cand;
                        heap.push(Item(cand.dist, cand.hops, v));
                    }
                }
            }
        }
        BasisGraph {
            basis,
            detectors,
            edges,
            pair,
            classes,
            to_class,
            sides: observables.iter().map(|&j| sides_for(j, &adj, &bound)).collect(),
            observables,
        }
    }

    /// Best way out of node `i` under `mode`. Ties go to the earliest class,
    /// so the trivial side wins them.
    fn boundary(&self, i: usize, mode: BoundaryMode) -> (Path, Node) {
        let mut best = (NO_PATH, Node::Trivial);
        for (c, &m) in self.classes.iter().enumerate() {
            let p = self.to_class[c][i];
            if mode.allows(m) && p.better_than(&best.0) {
                best = (p, if m == 0 { Node::Trivial } else { Node::Logical });
            }
        }
        best
    }

    /// Minimum-weight matching of `defects` among those whose prediction for
    /// observable `j` equals `flipped`; `None` when there is none or no
    /// potential exists for `j`.
    ///
    /// After the potential, only boundary edges flip `j`; those become a
    /// single vertex `L`, everything else stays a free boundary. Paths may pass
    /// through `L`, which crosses two such edges and leaves `j` alone, so the
    /// corrected parity of `j` is the number of path ends at `L`: one when
    /// `L` is flagged, none otherwise.
    pub fn coset_matching(&self, defects: &[usize], j: usize, flipped: bool) -> Option<BasisMatching> {
        let sides = self.sides[self.observables.iter().position(|&x| x == j)?].as_ref()?;
        let n = self.detectors.len();
        let add = |a: Path, b: Path| {
            if a.dist == UNREACHABLE || b.dist == UNREACHABLE {
                NO_PATH
            } else {
                Path {
                    dist: a.dist + b.dist,
                    hops: a.hops + b.hops,
                    mask: a.mask ^ b.mask,
                }
            }
        };
        let min = |a: Path, b: Path| if b.better_than(&a) { b } else { a };
        let [to_t, to_l] = &sides.to;
        // L to the free boundary, entering the detectors anywhere.
        let l_t = (0..n).fold(NO_PATH, |acc, i| min(acc, add(to_l[i], to_t[i])));
        let with_l = defects.iter().fold(flipped, |acc, &i| acc ^ sides.phi[i]);
        let k = defects.len();
        let m = k + with_l as usize;
        // Vertex a < k is defects[a]; vertex k (if present) is L. Twins at m + a.
        let pair = |a: usize, b: usize| {
            if b == k {
                to_l[defects[a]]
            } else {
                let (x, y) = (defects[a], defects[b]);
                min(self.pair[x * n + y], add(to_l[x], to_l[y]))
            }
        };
        let out_of = |a: usize| if a == k { l_t } else { min(to_t[defects[a]], add(to_l[defects[a]], l_t)) };
        let mut edges = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in a + 1..m {
                let p = pair(a, b);
                if p.dist != UNREACHABLE {
                    edges.push((a, b, p.dist));
                }
                edges.push((m + a, m + b, 0));
            }
            let p = out_of(a);
            if p.dist != UNREACHABLE {
                edges.push((a, m + a, p.dist));
            }
        }
        let mate = min_weight_perfect_matching(2 * m, &edges)?;
        let node = |a: usize| if a == k { Node::Logical } else { Node::Detector(self.detectors[defects[a]]) };
        let mut out = BasisMatching {
            weight: 0.0,
            edge_count: 0,
            mask: 0,
            pairs: Vec::new(),
        };
        let mut total = 0i64;
        for a in 0..m {
            let b = mate[a];
            let p = if b == m + a {
                out.pairs.push((node(a), Node::Trivial));
                out_of(a)
            } else if b < m && a < b {
                out.pairs.push((node(a), node(b)));
                pair(a, b)
            } else {
                continue;
            };
            if p.dist == UNREACHABLE {
                return None;
            }
            total += p.dist;
            out.edge_count += p.hops as usize;
            out.mask ^= p.mask;
        }
        debug_assert_eq!(out.mask >> j & 1 == 1, flipped);
        out.weight = total as f64 / SCALE;
        Some(out)
    }

    pub fn has_boundary(&self, node: Node) -> bool {
        self.edges.iter().any(|e| e.u == node || e.v == node)
    }

    /// Exact minimum-weight matching of the flagged local nodes `defects`;
    /// `None` when no matching exists under `mode`.
    pub fn match_defects(&self, defects: &[usize], mode: BoundaryMode) -> Option<BasisMatching> {
        let k = defects.len();
        let n = self.detectors.len();
        let mut edges = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in a + 1..k {
                let p = self.pair[defects[a] * n + defects[b]];
                if p.dist != UNREACHABLE {
                    edges.push((a, b, p.dist));
                }
                edges.push((k + a, k + b, 0));
            }
            let (p, _) = self.boundary(defects[a], mode);
            if p.dist != UNREACHABLE {
                edges.push((a, k + a, p.dist));
            }
        }
        let mate = min_weight_perfect_matching(2 * k, &edges)?;
        let mut out = BasisMatching {
            weight: 0.0,
            edge_count: 0,
            mask: 0,
            pairs: Vec::new(),
        };
        let mut total = 0i64;
        for a in 0..k {
            let b = mate[a];
            let p = if b == k + a {
                let (p, node) = self.boundary(defects[a], mode);
                out.pairs.push((Node::Detector(self.detectors[defects[a]]), node));
                p
            } else if b < k && a < b {
                out.pairs.push((
                    Node::Detector(self.detectors[defects[a]]),
                    Node::Detector(self.detectors[defects[b]]),
                ));
                self.pair[defects[a] * n + defects[b]]
            } else {
                // Pair already counted from its lower end.
                continue;
            };
            if p.dist == UNREACHABLE {
                return None;
            }
            total += p.dist;
            out.edge_count += p.hops as usize;
            out.mask ^= p.mask;
        }
        out.weight = total as f64 / SCALE;
        Some(out)
    }
}

/// Builds one graph per basis from the decomposed edges of `dem`.
pub fn build_matching_graph(dem: &DetectorErrorModel) -> Result<MatchingGraph> {
    if !dem.hyperedges.iter().all(|h| h.parts.is_some()) {
        return Err(Error::Decode("model contains undecomposed hyperedges".into()));
    }
    let obs_index: BTreeMap<ObsLabel, usize> = dem.observables.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let bases = [Basis::X, Basis::Z];
    let mut locate = vec![(0, 0); dem.detector_basis.len()];
    let mut dets: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (d, &b) in dem.detector_basis.iter().enumerate() {
        let g = if b == Basis::X { 0 } else { 1 };
        locate[d] = (g, dets[g].len());
        dets[g].push(d);
    }

    // Merge parallel edges; the observable mask of the likelier contributor wins.
    let mut warnings = Vec::new();
    let mut merged: [BTreeMap<(Node, Node), (f64, u64, f64)>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for e in &dem.edges {
        let mask = e.observables.iter().fold(0u64, |m, l| m | 1 << obs_index[l]);
        let (u, v) = match e.detectors[..] {
            [a] => (Node::Detector(a), if mask != 0 { Node::Logical } else { Node::Trivial }),
            [a, b] => (Node::Detector(a.min(b)), Node::Detector(a.max(b))),
            _ => return Err(Error::Decode(format!("edge with {} detectors", e.detectors.len()))),
        };
        let g = if e.basis == Basis::X { 0 } else { 1 };
        let entry = merged[g].entry((u, v)).or_insert((0.0, mask, 0.0));
        if entry.0 > 0.0 && entry.1 != mask {
            warnings.push(format!("parallel edges {u:?}-{v:?} disagree on observables"));
        }
        if e.probability > entry.2 {
            entry.1 = mask;
            entry.2 = e.probability;
        }
        entry.0 = merge_probability(entry.0, e.probability);
    }

    let mut graphs = Vec::new();
    for (g, basis) in bases.into_iter().enumerate() {
        let mut edges = Vec::new();
        let mut masks = Vec::new();
        for (&(u, v), &(q, mask, _)) in &merged[g] {
            if q >= 0.5 {
                warnings.push(format!("edge {u:?}-{v:?} has probability {q} >= 1/2; weight clamped to 0"));
            }
            edges.push(GraphEdge {
                u,
                v,
                weight: edge_weight(q),
                observable_flips: (0..dem.observables.len())
                    .filter(|j| mask >> j & 1 == 1)
                    .map(|j| dem.observables[j])
                    .collect(),
                edge_prob: q,
            });
            masks.push(mask);
        }
        let graph = BasisGraph::new(basis, std::mem::take(&mut dets[g]), edges, &masks, &locate);
        for (&j, s) in graph.observables.iter().zip(&graph.sides) {
            if s.is_none() {
                warnings.push(format!(
                    "{} flips around a loop of internal edges; its ambiguity check is skipped",
                    dem.observables[j].name()
                ));
            }
        }
        graphs.push(graph);
    }
    Ok(MatchingGraph {
        observables: dem.observables.clone(),
        graphs,
        locate,
        warnings,
    })
}

impl MatchingGraph {
    pub fn num_detectors(&self) -> usize {
        self.locate.len()
    }

    fn defects(&self, syndrome: &[bool]) -> Result<[Vec<usize>; 2]> {
        if syndrome.len() != self.locate.len() {
            return Err(Error::Decode(format!(
                "syndrome has {} bits, graph has {} detectors",
                syndrome.len(),
                self.locate.len()
            )));
        }
        let mut out: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (d, _) in syndrome.iter().enumerate().filter(|(_, &s)| s) {
            let (g, i) = self.locate[d];
            out[g].push(i);
        }
        Ok(out)
    }

    fn labels(&self, mask: u64) -> Vec<ObsLabel> {
        (0..self.observables.len())
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| self.observables[j])
            .collect()
    }

    fn infeasible(&self, g: usize, defects: &[usize]) -> Error {
        let graph = &self.graphs[g];
        let n = graph.detectors.len();
        let stuck = defects
            .iter()
            .find(|&&i| {
                graph.boundary(i, BoundaryMode::Both).0.dist == UNREACHABLE
                    && defects.iter().all(|&j| j == i || graph.pair[i * n + j].dist == UNREACHABLE)
            })
            .or(defects.first())
            .map(|&i| graph.detectors[i]);
        Error::Decode(format!("no matching exists for flagged detector D{}", stuck.unwrap_or(0)))
    }

    /// Plain minimum-weight matching decode.
    pub fn decode(&self, syndrome: &[bool]) -> Result<DecodeResult> {
        let defects = self.defects(syndrome)?;
        let mut res = DecodeResult {
            predicted_mask: 0,
            predicted_flips: Vec::new(),
            matched_edges: Vec::new(),
            weight: 0.0,
            keep: true,
            diagnostics: Vec::new(),
        };
        for (g, graph) in self.graphs.iter().enumerate() {
            let m = graph
                .match_defects(&defects[g], BoundaryMode::Both)
                .ok_or_else(|| self.infeasible(g, &defects[g]))?;
            res.predicted_mask ^= m.mask;
            res.weight += m.weight;
            res.matched_edges.extend(m.pairs);
        }
        res.predicted_flips = self.labels(res.predicted_mask);
        Ok(res)
    }

    /// Decode plus the ambiguity check: per observable, compare the optimal
    /// matchings that predict it flipped and unflipped. The observable is
    /// ambiguous when both exist and tie under `criterion`. The shot is kept
    /// when no observable is ambiguous.
    pub fn decode_with_postselection(&self, syndrome: &[bool], criterion: Ambiguity) -> Result<DecodeResult> {
        let mut res = self.decode(syndrome)?;
        let defects = self.defects(syndrome)?;
        for (g, graph) in self.graphs.iter().enumerate() {
            for &j in &graph.observables {
                let l = graph.coset_matching(&defects[g], j, true);
                let t = graph.coset_matching(&defects[g], j, false);
                let ambiguous = match (&l, &t) {
                    (Some(l), Some(t)) => match criterion {
                        Ambiguity::EdgeCount => l.edge_count == t.edge_count,
                        Ambiguity::Weight => (l.weight - t.weight).abs() <= 1e-9 * (1 + defects[g].len()) as f64,
                    },
                    _ => false,
                };
                res.diagnostics.push(BasisDiagnostics {
                    basis: graph.basis,
                    observable: self.observables[j],
                    logical_matching_size: l.map(|m| m.edge_count),
                    trivial_matching_size: t.map(|m| m.edge_count),
                    ambiguous,
                });
            }
        }
        res.keep = res.diagnostics.iter().all(|d| !d.ambiguous);
        Ok(res)
    }

    pub fn graph(&self, basis: Basis) -> &BasisGraph {
        &self.graphs[if basis == Basis::X { 0 } else { 1 }]
    }

    /// Local node of global detector `d` in its basis graph.
    pub fn local(&self, d: usize) -> (Basis, usize) {
        let (g, i) = self.locate[d];
        (self.graphs[g].basis, i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dem::{decompose, ErrorMechanism, Origin};

    fn mech(p: f64, dets: &[usize], obs: &[ObsLabel]) -> ErrorMechanism {
        ErrorMechanism {
            probability: p,
            detectors: dets.to_vec(),
            observables: obs.to_vec(),
            origin: Origin {
                instruction: 0,
                term: "X".into(),
            },
        }
    }

    /// Repetition-code-like chain D0 - D1 - D2 with the logical boundary on
    /// the left and the trivial one on the right.
    fn chain(p: f64) -> MatchingGraph {
        let o = ObsLabel::ZL1;
        let dem = decompose(
            vec![Basis::Z; 3],
            vec![o],
            vec![
                mech(p, &[0], &[o]),
                mech(p, &[0, 1], &[]),
                mech(p, &[1, 2], &[]),
                mech(p, &[2], &[]),
            ],
            true,
        )
        .unwrap();
        build_matching_graph(&dem).unwrap()
    }

    #[test]
    fn weights() {
        assert_eq!(edge_weight(0.5), 0.0);
        let q = merge_probability(0.01, 0.01);
        assert!((q - 0.0198).abs() < 1e-12);
        assert!((edge_weight(q) - (0.9802f64 / 0.0198).ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_syndrome() {
        let g = chain(0.01);
        let r = g.decode_with_postselection(&[false; 3], Ambiguity::EdgeCount).unwrap();
        assert!(r.keep && r.predicted_flips.is_empty() && r.matched_edges.is_empty());
    }

    #[test]
    fn single_defects() {
        let g = chain(0.01);
        let r = g.decode(&[true, false, false]).unwrap();
        assert_eq!(r.predicted_flips, vec![ObsLabel::ZL1]);
        let r = g.decode(&[false, false, true]).unwrap();
        assert!(r.predicted_flips.is_empty());
        // The middle defect is two edges from either boundary.
        let r = g.decode_with_postselection(&[false, true, false], Ambiguity::EdgeCount).unwrap();
        assert!(!r.keep);
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].logical_matching_size, Some(2));
        assert_eq!(r.diagnostics[0].trivial_matching_size, Some(2));
    }

    #[test]
    fn isolated_defect_is_an_error() {
        let o = ObsLabel::ZL1;
        let dem = decompose(vec![Basis::Z; 3], vec![o], vec![mech(0.01, &[0, 1], &[])], true).unwrap();
        let g = build_matching_graph(&dem).unwrap();
        let err = g.decode(&[false, false, true]).unwrap_err();
        assert!(err.to_string().contains("D2"));
    }
}
