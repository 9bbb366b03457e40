//! Stabilizer, gauge and logical structure of the 3CX and Bacon-Shor codes on
//! a `d x d` data grid. Qubit `(r, c)` has index `r * d + c`; row 0 carries the
//! logical X of both codes and column 0 the logical Z.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitVec, Basis};
use crate::lattice::CodeKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Option<Pauli> {
        match (x, z) {
            (true, false) => Some(Pauli::X),
            (true, true) => Some(Pauli::Y),
            (false, true) => Some(Pauli::Z),
            (false, false) => None,
        }
    }
}

/// Phase exponent `k` in `i^k` picked up by the single-qubit product `a * b`.
fn product_phase(a: Pauli, b: Pauli) -> u8 {
    use Pauli::*;
    match (a, b) {
        (X, Y) | (Y, Z) | (Z, X) => 1,
        (Y, X) | (Z, Y) | (X, Z) => 3,
        _ => 0,
    }
}

/// Sparse Pauli operator `i^phase * prod_q P_q`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct PauliString {
    ops: BTreeMap<usize, Pauli>,
    phase: u8,
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = ["+", "+i", "-", "-i"][self.phase as usize];
        write!(f, "{sign}")?;
        for (q, p) in &self.ops {
            write!(f, "{p:?}{q}")?;
        }
        Ok(())
    }
}

impl PauliString {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(q: usize, p: Pauli) -> Self {
        let mut s = Self::default();
        s.ops.insert(q, p);
        s
    }

    pub fn uniform(p: Pauli, qubits: impl IntoIterator<Item = usize>) -> Self {
        qubits
            .into_iter()
            .fold(Self::identity(), |acc, q| &acc * &Self::single(q, p))
    }

    pub fn x_on(qubits: impl IntoIterator<Item = usize>) -> Self {
        Self::uniform(Pauli::X, qubits)
    }

    pub fn z_on(qubits: impl IntoIterator<Item = usize>) -> Self {
        Self::uniform(Pauli::Z, qubits)
    }

    pub fn get(&self, q: usize) -> Option<Pauli> {
        self.ops.get(&q).copied()
    }

    pub fn weight(&self) -> usize {
        self.ops.len()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.ops.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Pauli)> + '_ {
        self.ops.iter().map(|(&q, &p)| (q, p))
    }

    pub fn is_identity(&self) -> bool {
        self.ops.is_empty()
    }

    /// `Some(+1 | -1)` for Hermitian operators, `None` for an imaginary phase.
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn negated(mut self) -> Self {
        self.phase = (self.phase + 2) % 4;
        self
    }

    /// Same operator with the phase reset to +1.
    pub fn unsigned(&self) -> Self {
        PauliString {
            ops: self.ops.clone(),
            phase: 0,
        }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let (small, large) = if self.weight() <= other.weight() {
            (self, other)
        } else {
            (other, self)
        };
        let mut anti = false;
        for (q, p) in small.iter() {
            if let Some(o) = large.get(q) {
                anti ^= p != o;
            }
        }
        !anti
    }

    pub fn is_x_type(&self) -> bool {
        self.ops.values().all(|&p| p == Pauli::X)
    }

    pub fn is_z_type(&self) -> bool {
        self.ops.values().all(|&p| p == Pauli::Z)
    }

    /// Symplectic `(x | z)` vector over `n` qubits, length `2n`.
    pub fn symplectic(&self, n: usize) -> BitVec {
        let mut v = BitVec::zeros(2 * n);
        for (q, p) in self.iter() {
            let (x, z) = p.bits();
            if x {
                v.set(q, true);
            }
            if z {
                v.set(n + q, true);
            }
        }
        v
    }
}

impl Mul for &PauliString {
    type Output = PauliString;

    fn mul(self, rhs: &PauliString) -> PauliString {
        let mut out = self.clone();
        out.phase = (out.phase + rhs.phase) % 4;
        for (q, b) in rhs.iter() {
            match out.ops.get(&q).copied() {
                None => {
                    out.ops.insert(q, b);
                }
                Some(a) => {
                    out.phase = (out.phase + product_phase(a, b)) % 4;
                    let (ax, az) = a.bits();
                    let (bx, bz) = b.bits();
                    match Pauli::from_bits(ax ^ bx, az ^ bz) {
                        Some(c) => {
                            out.ops.insert(q, c);
                        }
                        None => {
                            out.ops.remove(&q);
                        }
                    }
                }
            }
        }
        out
    }
}

impl Mul for PauliString {
    type Output = PauliString;

    fn mul(self, rhs: PauliString) -> PauliString {
        &self * &rhs
    }
}

/// Conjugates `p` by one layer of CX gates given as `(control, target)` pairs.
pub fn conjugate_through_cx(p: &PauliString, cx_list: &[(usize, usize)]) -> Result<PauliString> {
    let mut role: BTreeMap<usize, (usize, bool)> = BTreeMap::new();
    for (k, &(c, t)) in cx_list.iter().enumerate() {
        if c == t {
            return Err(Error::InvalidArgument(format!("CX {k} has control = target = {c}")));
        }
        for (q, is_control) in [(c, true), (t, false)] {
            if role.insert(q, (k, is_control)).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "qubit {q} used by more than one CX in the layer"
                )));
            }
        }
    }
    let image = |q: usize, x: bool| -> PauliString {
        match role.get(&q) {
            Some(&(k, true)) if x => PauliString::x_on([q, cx_list[k].1]),
            Some(&(k, false)) if !x => PauliString::z_on([cx_list[k].0, q]),
            _ => PauliString::single(q, if x { Pauli::X } else { Pauli::Z }),
        }
    };
    let mut out = PauliString {
        ops: BTreeMap::new(),
        phase: p.phase,
    };
    for (q, pq) in p.iter() {
        let term = match pq {
            Pauli::X => image(q, true),
            Pauli::Z => image(q, false),
            // Y = i X Z
            Pauli::Y => {
                let mut y = &image(q, true) * &image(q, false);
                y.phase = (y.phase + 1) % 4;
                y
            }
        };
        out = &out * &term;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
}

impl Variant {
    pub fn other(self) -> Variant {
        match self {
            Variant::A => Variant::B,
            Variant::B => Variant::A,
        }
    }

    /// Parity of `r + c` of the cells carrying X plaquettes.
    pub fn x_parity(self) -> i32 {
        match self {
            Variant::A => 1,
            Variant::B => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilizerSpec {
    pub code: CodeKind,
    pub d: usize,
    pub x_gens: Vec<PauliString>,
    pub z_gens: Vec<PauliString>,
    pub variant: Option<Variant>,
    pub logical_x: PauliString,
    pub logical_z: PauliString,
}

impl StabilizerSpec {
    pub fn generators(&self) -> impl Iterator<Item = &PauliString> {
        self.x_gens.iter().chain(&self.z_gens)
    }

    pub fn n(&self) -> usize {
        self.d * self.d
    }

    pub fn qubit(&self, r: usize, c: usize) -> usize {
        r * self.d + c
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeSpec {
    /// `xg(r, c)` on `(r, c), (r+1, c)` in row-major order of `(r, c)`.
    pub x_gauges: Vec<PauliString>,
    /// `zg(r, c)` on `(r, c), (r, c+1)` in row-major order of `(r, c)`.
    pub z_gauges: Vec<PauliString>,
    /// X stabilizer `i` is the product of these X gauges.
    pub x_products: Vec<Vec<usize>>,
    /// Z stabilizer `j` is the product of these Z gauges.
    pub z_products: Vec<Vec<usize>>,
}

fn check_distance(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("distance {d} < 2")));
    }
    Ok(())
}

/// Cell `(r, c)` of a 3CX patch with its stabilizer type and support, for every
/// cell that carries a generator in `variant`. Cells are listed row-major.
pub fn threecx_cells(d: usize, variant: Variant) -> Vec<((i32, i32), Pauli, Vec<(usize, usize)>)> {
    let n = d as i32;
    let mut out = Vec::new();
    for r in -1..n {
        for c in -1..n {
            let support: Vec<(usize, usize)> = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
                .into_iter()
                .filter(|&(rr, cc)| (0..n).contains(&rr) && (0..n).contains(&cc))
                .map(|(rr, cc)| (rr as usize, cc as usize))
                .collect();
            let is_x = (r + c).rem_euclid(2) == variant.x_parity();
            let bulk = (0..n - 1).contains(&r) && (0..n - 1).contains(&c);
            let side = (c == -1 || c == n - 1) && (0..n - 1).contains(&r);
            let cap = (r == -1 || r == n - 1) && (0..n - 1).contains(&c);
            let kind = if bulk {
                Some(if is_x { Pauli::X } else { Pauli::Z })
            } else if side && is_x {
                Some(Pauli::X)
            } else if cap && !is_x {
                Some(Pauli::Z)
            } else {
                None
            };
            if let Some(k) = kind {
                out.push(((r, c), k, support));
            }
        }
    }
    out
}

pub fn threecx_spec(d: usize, variant: Variant) -> Result<StabilizerSpec> {
    check_distance(d)?;
    let mut x_gens = Vec::new();
    let mut z_gens = Vec::new();
    for (_, kind, support) in threecx_cells(d, variant) {
        let qs = support.into_iter().map(|(r, c)| r * d + c);
        match kind {
            Pauli::X => x_gens.push(PauliString::x_on(qs)),
            _ => z_gens.push(PauliString::z_on(qs)),
        }
    }
    Ok(StabilizerSpec {
        code: CodeKind::ThreeCx,
        d,
        x_gens,
        z_gens,
        variant: Some(variant),
        logical_x: PauliString::x_on(0..d),
        logical_z: PauliString::z_on((0..d).map(|r| r * d)),
    })
}

pub fn bacon_shor_spec(d: usize) -> Result<(StabilizerSpec, GaugeSpec)> {
    check_distance(d)?;
    let q = |r: usize, c: usize| r * d + c;
    let x_gens = (0..d - 1)
        .map(|i| PauliString::x_on((0..d).flat_map(|c| [q(i, c), q(i + 1, c)])))
        .collect();
    let z_gens = (0..d - 1)
        .map(|j| PauliString::z_on((0..d).flat_map(|r| [q(r, j), q(r, j + 1)])))
        .collect();
    let mut x_gauges = Vec::new();
    let mut x_products = vec![Vec::new(); d - 1];
    for r in 0..d - 1 {
        for c in 0..d {
            x_products[r].push(x_gauges.len());
            x_gauges.push(PauliString::x_on([q(r, c), q(r + 1, c)]));
        }
    }
    let mut z_gauges = Vec::new();
    let mut z_products = vec![Vec::new(); d - 1];
    for r in 0..d {
        for c in 0..d - 1 {
            z_products[c].push(z_gauges.len());
            z_gauges.push(PauliString::z_on([q(r, c), q(r, c + 1)]));
        }
    }
    let spec = StabilizerSpec {
        code: CodeKind::BaconShor,
        d,
        x_gens,
        z_gens,
        variant: None,
        logical_x: PauliString::x_on(0..d),
        logical_z: PauliString::z_on((0..d).map(|r| q(r, 0))),
    };
    Ok((
        spec,
        GaugeSpec {
            x_gauges,
            z_gauges,
            x_products,
            z_products,
        },
    ))
}

/// Row products of the 3CX X generators (stripes on rows `i, i+1`) followed by
/// column products of the Z generators (stripes on columns `j, j+1`).
pub fn downgraded_stabilizers(spec: &StabilizerSpec) -> Result<Vec<PauliString>> {
    let variant = match (spec.code, spec.variant) {
        (CodeKind::ThreeCx, Some(v)) => v,
        _ => return Err(Error::InvalidArgument("downgraded stabilizers need a 3CX spec".into())),
    };
    let d = spec.d;
    let cells = threecx_cells(d, variant);
    let mut x_rows = vec![PauliString::identity(); d - 1];
    let mut z_cols = vec![PauliString::identity(); d - 1];
    for ((r, c), kind, support) in cells {
        let qs = support.into_iter().map(|(rr, cc)| rr * d + cc);
        match kind {
            Pauli::X if r >= 0 && r < d as i32 - 1 => {
                x_rows[r as usize] = &x_rows[r as usize] * &PauliString::x_on(qs);
            }
            Pauli::Z if c >= 0 && c < d as i32 - 1 => {
                z_cols[c as usize] = &z_cols[c as usize] * &PauliString::z_on(qs);
            }
            _ => {}
        }
    }
    Ok(x_rows.into_iter().chain(z_cols).collect())
}

/// Whether `p` (up to sign) lies in the GF(2) span of `gens`.
pub fn in_span(gens: &[PauliString], p: &PauliString, n: usize) -> bool {
    let mut basis = Basis::new(0);
    for g in gens {
        basis.insert(g.symplectic(n));
    }
    basis.contains(&p.symplectic(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_times_y_is_identity_and_xz_is_minus_i_y() {
        let y = PauliString::single(0, Pauli::Y);
        assert!((&y * &y).is_identity());
        let xz = &PauliString::single(0, Pauli::X) * &PauliString::single(0, Pauli::Z);
        assert_eq!(xz.get(0), Some(Pauli::Y));
        assert_eq!(xz.phase, 3);
    }

    #[test]
    fn yy_equals_minus_xx_zz() {
        let xx = PauliString::x_on([0, 1]);
        let zz = PauliString::z_on([0, 1]);
        let prod = &xx * &zz;
        assert_eq!(prod.unsigned(), PauliString::uniform(Pauli::Y, [0, 1]));
        assert_eq!(prod.sign(), Some(-1));
    }

    #[test]
    fn generator_counts() {
        assert_eq!(threecx_spec(2, Variant::A).unwrap().generators().count(), 3);
        assert_eq!(threecx_spec(3, Variant::B).unwrap().generators().count(), 8);
        let (bs, g) = bacon_shor_spec(2).unwrap();
        assert_eq!((bs.x_gens.len(), bs.z_gens.len()), (1, 1));
        assert_eq!((g.x_gauges.len(), g.z_gauges.len()), (2, 2));
    }

    #[test]
    fn cx_conjugation_of_target_z() {
        let z = PauliString::single(1, Pauli::Z);
        assert_eq!(conjugate_through_cx(&z, &[(0, 1)]).unwrap(), PauliString::z_on([0, 1]));
        assert!(conjugate_through_cx(&z, &[(0, 1), (1, 2)]).is_err());
    }

    #[test]
    fn cx_conjugation_of_yy_picks_up_sign() {
        let yy = PauliString::uniform(Pauli::Y, [0, 1]);
        let out = conjugate_through_cx(&yy, &[(0, 1)]).unwrap();
        assert_eq!(out.unsigned(), &PauliString::single(0, Pauli::X) * &PauliString::single(1, Pauli::Z));
        assert_eq!(out.sign(), Some(-1));
    }

    #[test]
    fn small_distance_rejected() {
        assert!(threecx_spec(1, Variant::A).is_err());
        assert!(bacon_shor_spec(0).is_err());
    }
}
