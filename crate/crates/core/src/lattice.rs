//! Heavy-hex qubit graphs and the two code sublattices carved out of them.
//!
//! Coordinates are doubled: vertex `(i, j)` of the brick-wall grid sits at
//! `(2i, 2j)`, the link on the horizontal edge to its right at `(2i, 2j+1)` and
//! the link on the vertical edge below it at `(2i+1, 2j)`. A vertical edge joins
//! `(i, j)` and `(i+1, j)` iff `i + j` is even. The bearded variant adds a
//! dangling link below every bottom-row vertex that would have had a downward
//! edge.
//!
//! The 3CX code lives on vertices, Bacon-Shor on links. A 3CX data qubit `(r, c)`
//! sits at vertex `(I0 - (r + c), J0 + c - r)` and the Bacon-Shor data qubit with
//! the same grid index is the link directly below it, so transversal CX pairs
//! are native edges.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Vertex,
    Link,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub row: i32,
    pub col: i32,
    pub role: Role,
}

/// Heavy-hex graph. `rows` and `cols` count hexagons, so the vertex grid is
/// `(rows + 1) x (2 cols + 2)`; `build_heavy_hex(6, 3, true)` has the 133 nodes
/// of the current large devices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeavyHexLattice {
    pub rows: usize,
    pub cols: usize,
    pub bearded: bool,
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    index: HashMap<(i32, i32), usize>,
}

#[derive(Serialize, Deserialize)]
struct LatticeJson {
    nodes: Vec<Node>,
    edges: Vec<[usize; 2]>,
    bearded: bool,
}

pub fn build_heavy_hex(rows: usize, cols: usize, bearded: bool) -> Result<HeavyHexLattice> {
    if rows < 2 || cols < 2 {
        return Err(Error::Construction(format!(
            "{rows}x{cols} hexagons cannot host a distance-2 patch; need at least 2x2"
        )));
    }
    let vrows = rows as i32 + 1;
    let vcols = 2 * cols as i32 + 2;

    let mut coords: Vec<(i32, i32, Role)> = Vec::new();
    for i in 0..vrows {
        for j in 0..vcols {
            coords.push((2 * i, 2 * j, Role::Vertex));
            if j + 1 < vcols {
                coords.push((2 * i, 2 * j + 1, Role::Link));
            }
        }
        for j in 0..vcols {
            let has_down = (i + j) % 2 == 0;
            if has_down && (i + 1 < vrows || bearded) {
                coords.push((2 * i + 1, 2 * j, Role::Link));
            }
        }
    }
    coords.sort_by_key(|&(r, c, _)| (r, c));

    let nodes: Vec<Node> = coords
        .iter()
        .enumerate()
        .map(|(id, &(row, col, role))| Node { id, row, col, role })
        .collect();
    let index: HashMap<(i32, i32), usize> = nodes.iter().map(|n| ((n.row, n.col), n.id)).collect();

    let mut edges = Vec::new();
    for n in nodes.iter().filter(|n| n.role == Role::Link) {
        let (a, b) = if n.row % 2 == 0 {
            ((n.row, n.col - 1), (n.row, n.col + 1))
        } else {
            ((n.row - 1, n.col), (n.row + 1, n.col))
        };
        for end in [a, b] {
            if let Some(&v) = index.get(&end) {
                edges.push((v.min(n.id), v.max(n.id)));
            }
        }
    }
    edges.sort_unstable();

    let mut adjacency = vec![Vec::new(); nodes.len()];
    for &(a, b) in &edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    Ok(HeavyHexLattice {
        rows,
        cols,
        bearded,
        nodes,
        edges,
        adjacency,
        index,
    })
}

impl HeavyHexLattice {
    /// The 7x8-vertex bearded lattice of the 133-qubit devices.
    pub fn device() -> Self {
        build_heavy_hex(6, 3, true).expect("device lattice is valid")
    }

    /// Smallest bearded lattice hosting both codes at distance `d` with the
    /// default placement. For d=4 this is the device lattice.
    pub fn for_distance(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!("distance {d} < 2")));
        }
        build_heavy_hex((2 * d - 2).max(2), (d - 1).max(2), true)
    }

    pub fn vertex_rows(&self) -> i32 {
        self.rows as i32 + 1
    }

    pub fn vertex_cols(&self) -> i32 {
        2 * self.cols as i32 + 2
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_at(&self, row: i32, col: i32) -> Option<usize> {
        self.index.get(&(row, col)).copied()
    }

    pub fn vertex(&self, i: i32, j: i32) -> Option<usize> {
        self.node_at(2 * i, 2 * j)
    }

    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency.get(a).is_some_and(|adj| adj.binary_search(&b).is_ok())
    }

    pub fn to_json(&self) -> String {
        let js = LatticeJson {
            nodes: self.nodes.clone(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            bearded: self.bearded,
        };
        serde_json::to_string_pretty(&js).expect("lattice serializes")
    }
}

/// The unique middle node of a length-2 path between `a` and `b`.
pub fn nnn_path(lat: &HeavyHexLattice, a: usize, b: usize) -> Result<usize> {
    let err = |reason: &str| Error::NnnPath {
        a,
        b,
        reason: reason.to_string(),
    };
    if a >= lat.len() || b >= lat.len() {
        return Err(err("node id out of range"));
    }
    if a == b || lat.adjacent(a, b) {
        return Err(err("nodes are not at distance 2"));
    }
    let common: Vec<usize> = lat
        .neighbors(a)
        .iter()
        .copied()
        .filter(|&m| lat.adjacent(m, b))
        .collect();
    match common.as_slice() {
        [m] => Ok(*m),
        [] => Err(err("no length-2 path")),
        _ => Err(err("multiple middle candidates")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodeKind {
    ThreeCx,
    BaconShor,
}

impl fmt::Display for CodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeKind::ThreeCx => write!(f, "3cx"),
            CodeKind::BaconShor => write!(f, "bs"),
        }
    }
}

/// Ancilla roles. Cell indices of 3CX measure qubits run over `[-1, d-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AncillaLabel {
    /// 3CX measure qubit of unit cell `(r, c)`; its corners are data `(r..=r+1, c..=c+1)`.
    Cell(i32, i32),
    /// Bacon-Shor X gauge on data `(r, c)` and `(r+1, c)`.
    XGauge(usize, usize),
    /// Bacon-Shor Z gauge on data `(r, c)` and `(r, c+1)`.
    ZGauge(usize, usize),
}

impl fmt::Display for AncillaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AncillaLabel::Cell(r, c) => write!(f, "m({r},{c})"),
            AncillaLabel::XGauge(r, c) => write!(f, "xg({r},{c})"),
            AncillaLabel::ZGauge(r, c) => write!(f, "zg({r},{c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SublatticeMap {
    pub code: CodeKind,
    pub d: usize,
    pub data: BTreeMap<(usize, usize), usize>,
    pub ancilla: BTreeMap<AncillaLabel, usize>,
    /// Keyed by the ordered endpoint pair `(min, max)`.
    pub nnn_middles: BTreeMap<(usize, usize), usize>,
}

impl SublatticeMap {
    pub fn data_qubit(&self, r: usize, c: usize) -> usize {
        self.data[&(r, c)]
    }

    pub fn middle(&self, a: usize, b: usize) -> Option<usize> {
        self.nnn_middles.get(&(a.min(b), a.max(b))).copied()
    }

    /// Data node ids in row-major grid order.
    pub fn data_nodes(&self) -> Vec<usize> {
        self.data.values().copied().collect()
    }
}

/// Patch origin: vertex `(I0, J0)` carries 3CX data `(0, 0)`. `I0 + J0` must be even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub origin_row: i32,
    pub origin_col: i32,
}

impl Placement {
    /// Top corner on the first vertex row, as centred as parity allows. On the
    /// device lattice every distance shares the d=4 top corner.
    pub fn default_for(lat: &HeavyHexLattice, d: usize) -> Self {
        let half = lat.vertex_cols() / 2;
        Placement {
            origin_row: 2 * (d as i32 - 1),
            origin_col: half - half.rem_euclid(2),
        }
    }

    pub fn data_vertex(&self, r: i32, c: i32) -> (i32, i32) {
        (self.origin_row - (r + c), self.origin_col + c - r)
    }

    pub fn cell_vertex(&self, r: i32, c: i32) -> (i32, i32) {
        (self.origin_row - (r + c + 1), self.origin_col + c - r)
    }
}

/// 3CX cells that carry a measure qubit: the bulk plus the left and top
/// boundary rows. Right and bottom boundary stabilizers are produced by the
/// bulk schedule and need no qubit of their own.
pub fn active_cells(d: usize) -> Vec<(i32, i32)> {
    let n = d as i32;
    let mut cells = Vec::new();
    for r in -1..n {
        for c in -1..n {
            let bulk = (0..n - 1).contains(&r) && (0..n - 1).contains(&c);
            let left = c == -1 && (0..n - 1).contains(&r);
            let top = r == -1 && (0..n - 1).contains(&c);
            if bulk || left || top {
                cells.push((r, c));
            }
        }
    }
    cells
}

/// Corners of cell `(r, c)` that its measure qubit couples to, with the
/// direction of the coupling link: bottom-left via W, top-right via E,
/// bottom-right via N (in lattice orientation).
pub fn cell_couplings(d: usize, r: i32, c: i32) -> Vec<Corner> {
    let n = d as i32;
    let inside = |rr: i32, cc: i32| (0..n).contains(&rr) && (0..n).contains(&cc);
    let mut out = Vec::new();
    for corner in [Corner::BottomLeft, Corner::TopRight, Corner::BottomRight] {
        let (rr, cc) = corner.data(r, c);
        if inside(rr, cc) {
            out.push(corner);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Corner {
    BottomLeft,
    TopRight,
    BottomRight,
}

impl Corner {
    pub fn data(self, r: i32, c: i32) -> (i32, i32) {
        match self {
            Corner::BottomLeft => (r + 1, c),
            Corner::TopRight => (r, c + 1),
            Corner::BottomRight => (r + 1, c + 1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub lattice: HeavyHexLattice,
    pub d: usize,
    pub placement: Placement,
    pub three_cx: SublatticeMap,
    pub bacon_shor: SublatticeMap,
}

impl Layout {
    /// Both codes at distance `d` on [`HeavyHexLattice::for_distance`].
    pub fn for_distance(d: usize) -> Result<Self> {
        let lat = HeavyHexLattice::for_distance(d)?;
        Self::new(lat, d)
    }

    pub fn new(lattice: HeavyHexLattice, d: usize) -> Result<Self> {
        let placement = Placement::default_for(&lattice, d);
        Self::with_placement(lattice, d, placement)
    }

    pub fn with_placement(lattice: HeavyHexLattice, d: usize, placement: Placement) -> Result<Self> {
        let (three_cx, bacon_shor) = extract_sublattices_at(&lattice, d, placement)?;
        Ok(Layout {
            lattice,
            d,
            placement,
            three_cx,
            bacon_shor,
        })
    }
}

pub fn extract_sublattices(lat: &HeavyHexLattice, d: usize) -> Result<(SublatticeMap, SublatticeMap)> {
    extract_sublattices_at(lat, d, Placement::default_for(lat, d))
}

pub fn extract_sublattices_at(
    lat: &HeavyHexLattice,
    d: usize,
    placement: Placement,
) -> Result<(SublatticeMap, SublatticeMap)> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("distance {d} < 2")));
    }
    if (placement.origin_row + placement.origin_col) % 2 != 0 {
        return Err(Error::Placement(format!(
            "origin ({}, {}) has odd parity; data vertices need a downward edge",
            placement.origin_row, placement.origin_col
        )));
    }
    let n = d as i32;
    let vertex = |(i, j): (i32, i32), what: &str| {
        lat.vertex(i, j)
            .ok_or_else(|| Error::Placement(format!("missing vertex ({i},{j}) for {what}")))
    };
    let link = |(row, col): (i32, i32), what: &str| {
        lat.node_at(row, col).ok_or_else(|| {
            Error::Placement(format!("missing link at doubled coordinate ({row},{col}) for {what}"))
        })
    };

    let mut data3 = BTreeMap::new();
    let mut data_bs = BTreeMap::new();
    for r in 0..n {
        for c in 0..n {
            let (i, j) = placement.data_vertex(r, c);
            let v = vertex((i, j), &format!("3CX data q({r},{c})"))?;
            data3.insert((r as usize, c as usize), v);
            let b = lat.node_at(2 * i + 1, 2 * j).ok_or_else(|| {
                Error::Placement(format!(
                    "missing link below vertex ({i},{j}) for Bacon-Shor data q({r},{c}); \
                     the bottom row needs a bearded lattice"
                ))
            })?;
            data_bs.insert((r as usize, c as usize), b);
        }
    }

    let mut anc3 = BTreeMap::new();
    let mut mid3 = BTreeMap::new();
    for (r, c) in active_cells(d) {
        let (i, j) = placement.cell_vertex(r, c);
        let m = vertex((i, j), &format!("3CX measure qubit of cell ({r},{c})"))?;
        anc3.insert(AncillaLabel::Cell(r, c), m);
        for corner in cell_couplings(d, r, c) {
            let (rr, cc) = corner.data(r, c);
            let q = data3[&(rr as usize, cc as usize)];
            let coupler = match corner {
                Corner::BottomLeft => (2 * i, 2 * j - 1),
                Corner::TopRight => (2 * i, 2 * j + 1),
                Corner::BottomRight => (2 * i - 1, 2 * j),
            };
            let mid = link(coupler, &format!("3CX coupling m({r},{c})-q({rr},{cc})"))?;
            mid3.insert((m.min(q), m.max(q)), mid);
        }
    }

    let mut anc_bs = BTreeMap::new();
    let mut mid_bs = BTreeMap::new();
    for r in 0..n {
        for c in 0..n {
            let (i, j) = placement.data_vertex(r, c);
            let v = data3[&(r as usize, c as usize)];
            let here = data_bs[&(r as usize, c as usize)];
            if c + 1 < n {
                let a = link((2 * i, 2 * j + 1), &format!("Bacon-Shor Z gauge zg({r},{c})"))?;
                anc_bs.insert(AncillaLabel::ZGauge(r as usize, c as usize), a);
                let right = data_bs[&(r as usize, c as usize + 1)];
                let m = vertex((i, j + 1), "Bacon-Shor Z gauge middle")?;
                mid_bs.insert((a.min(here), a.max(here)), v);
                mid_bs.insert((a.min(right), a.max(right)), m);
            }
            if r + 1 < n {
                let a = link((2 * i, 2 * j - 1), &format!("Bacon-Shor X gauge xg({r},{c})"))?;
                anc_bs.insert(AncillaLabel::XGauge(r as usize, c as usize), a);
                let below = data_bs[&(r as usize + 1, c as usize)];
                let m = vertex((i, j - 1), "Bacon-Shor X gauge middle")?;
                mid_bs.insert((a.min(here), a.max(here)), v);
                mid_bs.insert((a.min(below), a.max(below)), m);
            }
        }
    }

    let three = SublatticeMap {
        code: CodeKind::ThreeCx,
        d,
        data: data3,
        ancilla: anc3,
        nnn_middles: mid3,
    };
    let bs = SublatticeMap {
        code: CodeKind::BaconShor,
        d,
        data: data_bs,
        ancilla: anc_bs,
        nnn_middles: mid_bs,
    };
    for map in [&three, &bs] {
        for (&(a, b), &m) in &map.nnn_middles {
            if !lat.adjacent(a, m) || !lat.adjacent(b, m) {
                return Err(Error::Placement(format!(
                    "middle {m} is not adjacent to both {a} and {b}"
                )));
            }
        }
    }
    Ok((three, bs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn device_has_133_nodes() {
        let lat = HeavyHexLattice::device();
        assert_eq!(lat.len(), 133);
        assert_eq!(lat.nodes.iter().filter(|n| n.role == Role::Vertex).count(), 56);
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(build_heavy_hex(1, 2, false).is_err());
        assert!(build_heavy_hex(2, 1, true).is_err());
    }

    #[test]
    fn minimal_lattice_hosts_d2() {
        let lat = build_heavy_hex(2, 2, true).unwrap();
        let (a, b) = extract_sublattices(&lat, 2).unwrap();
        assert_eq!(a.data.len(), 4);
        assert_eq!(b.data.len(), 4);
    }

    #[test]
    fn device_hosts_d4_only_with_beard() {
        let lat = HeavyHexLattice::device();
        assert!(extract_sublattices(&lat, 4).is_ok());
        let bare = build_heavy_hex(6, 3, false).unwrap();
        let err = extract_sublattices(&bare, 4).unwrap_err().to_string();
        assert!(err.contains("missing link below vertex (6,4)"), "{err}");
    }

    #[test]
    fn adjacent_pair_has_no_nnn_path() {
        let lat = HeavyHexLattice::device();
        let (a, b) = lat.edges[0];
        assert!(nnn_path(&lat, a, b).is_err());
    }

    #[test]
    fn json_round_trip_shape() {
        let lat = build_heavy_hex(2, 2, false).unwrap();
        let v: serde_json::Value = serde_json::from_str(&lat.to_json()).unwrap();
        assert_eq!(v["nodes"].as_array().unwrap().len(), lat.len());
        assert_eq!(v["edges"].as_array().unwrap().len(), lat.edges.len());
    }
}
