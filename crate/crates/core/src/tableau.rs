//! Aaronson-Gottesman stabilizer tableau. This is the noiseless reference
//! simulator used to check detector determinism; it deliberately shares no
//! code with the Pauli-frame sampler in `dem`.

use rand::Rng;

use crate::circuit::{Circuit, Instruction, Op};

/// Rows `0..n` are destabilizers, `n..2n` stabilizers, row `2n` is scratch.
#[derive(Debug, Clone)]
pub struct Tableau {
    n: usize,
    words: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<bool>,
}

impl Tableau {
    /// All qubits in |0>.
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        let rows = 2 * n + 1;
        let mut t = Tableau {
            n,
            words,
            x: vec![0; rows * words],
            z: vec![0; rows * words],
            r: vec![false; rows],
        };
        for q in 0..n {
            t.set_x(q, q, true);
            t.set_z(n + q, q, true);
        }
        t
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    fn bit(v: &[u64], words: usize, row: usize, q: usize) -> bool {
        v[row * words + q / 64] >> (q % 64) & 1 == 1
    }

    #[inline]
    fn get_x(&self, row: usize, q: usize) -> bool {
        Self::bit(&self.x, self.words, row, q)
    }

    #[inline]
    fn get_z(&self, row: usize, q: usize) -> bool {
        Self::bit(&self.z, self.words, row, q)
    }

    fn set_x(&mut self, row: usize, q: usize, b: bool) {
        let k = row * self.words + q / 64;
        let m = 1u64 << (q % 64);
        if b {
            self.x[k] |= m
        } else {
            self.x[k] &= !m
        }
    }

    fn set_z(&mut self, row: usize, q: usize, b: bool) {
        let k = row * self.words + q / 64;
        let m = 1u64 << (q % 64);
        if b {
            self.z[k] |= m
        } else {
            self.z[k] &= !m
        }
    }

    pub fn h(&mut self, a: usize) {
        let (w, m) = (a / 64, 1u64 << (a % 64));
        for row in 0..2 * self.n {
            let k = row * self.words + w;
            let xa = self.x[k] & m != 0;
            let za = self.z[k] & m != 0;
            self.r[row] ^= xa && za;
            if xa != za {
                self.x[k] ^= m;
                self.z[k] ^= m;
            }
        }
    }

    pub fn cx(&mut self, a: usize, b: usize) {
        for row in 0..2 * self.n {
            let xa = self.get_x(row, a);
            let zb = self.get_z(row, b);
            if !(xa || zb) {
                continue;
            }
            let xb = self.get_x(row, b);
            let za = self.get_z(row, a);
            self.r[row] ^= xa && zb && (xb == za);
            if xa {
                self.set_x(row, b, !xb);
            }
            if zb {
                self.set_z(row, a, !za);
            }
        }
    }

    /// Pauli X on `a` flips the sign of every row with a Z component there.
    fn apply_x(&mut self, a: usize) {
        for row in 0..2 * self.n {
            if self.get_z(row, a) {
                self.r[row] ^= true;
            }
        }
    }

    /// Multiplies row `h` by row `i` in place, tracking the phase.
    fn rowsum(&mut self, h: usize, i: usize) {
        let w = self.words;
        let mut sum: i64 = 2 * (self.r[h] as i64 + self.r[i] as i64);
        for k in 0..w {
            let x1 = self.x[i * w + k];
            let z1 = self.z[i * w + k];
            let x2 = self.x[h * w + k];
            let z2 = self.z[h * w + k];
            let y1 = x1 & z1;
            let xo = x1 & !z1;
            let zo = z1 & !x1;
            let pos = (y1 & z2 & !x2) | (xo & z2 & x2) | (zo & x2 & !z2);
            let neg = (y1 & x2 & !z2) | (xo & z2 & !x2) | (zo & x2 & z2);
            sum += pos.count_ones() as i64 - neg.count_ones() as i64;
            self.x[h * w + k] = x1 ^ x2;
            self.z[h * w + k] = z1 ^ z2;
        }
        self.r[h] = sum.rem_euclid(4) == 2;
    }

    fn copy_row(&mut self, dst: usize, src: usize) {
        let w = self.words;
        self.x.copy_within(src * w..(src + 1) * w, dst * w);
        self.z.copy_within(src * w..(src + 1) * w, dst * w);
        self.r[dst] = self.r[src];
    }

    fn clear_row(&mut self, row: usize) {
        let w = self.words;
        self.x[row * w..(row + 1) * w].fill(0);
        self.z[row * w..(row + 1) * w].fill(0);
        self.r[row] = false;
    }

    /// Whether a Z measurement on `a` would be deterministic.
    pub fn is_deterministic_z(&self, a: usize) -> bool {
        (self.n..2 * self.n).all(|row| !self.get_x(row, a))
    }

    /// Z-basis measurement; returns `(outcome, was_random)`.
    pub fn measure_z<R: Rng>(&mut self, a: usize, rng: &mut R) -> (bool, bool) {
        let n = self.n;
        let p = (n..2 * n).find(|&row| self.get_x(row, a));
        match p {
            Some(p) => {
                for row in 0..2 * n {
                    if row != p && self.get_x(row, a) {
                        self.rowsum(row, p);
                    }
                }
                self.copy_row(p - n, p);
                self.clear_row(p);
                self.set_z(p, a, true);
                let outcome = rng.gen::<bool>();
                self.r[p] = outcome;
                (outcome, true)
            }
            None => {
                let scratch = 2 * n;
                self.clear_row(scratch);
                for i in 0..n {
                    if self.get_x(i, a) {
                        self.rowsum(scratch, i + n);
                    }
                }
                (self.r[scratch], false)
            }
        }
    }

    pub fn measure_x<R: Rng>(&mut self, a: usize, rng: &mut R) -> (bool, bool) {
        self.h(a);
        let out = self.measure_z(a, rng);
        self.h(a);
        out
    }

    pub fn reset_z<R: Rng>(&mut self, a: usize, rng: &mut R) {
        let (m, _) = self.measure_z(a, rng);
        if m {
            self.apply_x(a);
        }
    }

    pub fn reset_x<R: Rng>(&mut self, a: usize, rng: &mut R) {
        self.h(a);
        self.reset_z(a, rng);
        self.h(a);
    }

    /// Expectation sign of a Pauli product given as (x bits, z bits) qubit
    /// lists, if it is in the stabilizer group.
    pub fn peek_pauli(&self, xs: &[usize], zs: &[usize]) -> Option<bool> {
        let n = self.n;
        // The operator is determined iff it commutes with every stabilizer.
        let anticommutes = |row: usize| {
            let mut acc = false;
            for &q in xs {
                acc ^= self.get_z(row, q);
            }
            for &q in zs {
                acc ^= self.get_x(row, q);
            }
            acc
        };
        if (n..2 * n).any(anticommutes) {
            return None;
        }
        let mut t = self.clone();
        let scratch = 2 * n;
        t.clear_row(scratch);
        for i in 0..n {
            if anticommutes(i) {
                t.rowsum(scratch, i + n);
            }
        }
        // The scratch row now equals the operator up to a phase; compare the
        // Y count to fix i factors.
        let mut target_x = vec![false; n];
        let mut target_z = vec![false; n];
        for &q in xs {
            target_x[q] ^= true;
        }
        for &q in zs {
            target_z[q] ^= true;
        }
        for q in 0..n {
            if t.get_x(scratch, q) != target_x[q] || t.get_z(scratch, q) != target_z[q] {
                return None;
            }
        }
        Some(t.r[scratch])
    }
}

/// Maps lattice node ids to dense tableau indices for the qubits a circuit touches.
#[derive(Debug, Clone)]
pub struct QubitIndex {
    dense: Vec<Option<usize>>,
    pub nodes: Vec<usize>,
}

impl QubitIndex {
    pub fn for_circuit(c: &Circuit) -> Self {
        let nodes = c.active_qubits();
        let mut dense = vec![None; c.num_qubits];
        for (k, &q) in nodes.iter().enumerate() {
            dense[q] = Some(k);
        }
        QubitIndex { dense, nodes }
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.dense.get(node).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Runs the circuit once; returns the measurement record. `inject` is called
/// before each instruction index with the tableau, for fault-injection tests.
pub fn run_circuit<R: Rng>(
    c: &Circuit,
    rng: &mut R,
    mut inject: impl FnMut(usize, &mut Tableau, &QubitIndex),
) -> Vec<bool> {
    let idx = QubitIndex::for_circuit(c);
    let mut t = Tableau::new(idx.len());
    let mut record = vec![false; c.num_measurements];
    for (k, ins) in c.instructions.iter().enumerate() {
        inject(k, &mut t, &idx);
        run_instruction(&mut t, &idx, ins, rng, &mut record);
    }
    record
}

fn run_instruction<R: Rng>(t: &mut Tableau, idx: &QubitIndex, ins: &Instruction, rng: &mut R, record: &mut [bool]) {
    let q = |k: usize| idx.get(ins.qubits()[k]).expect("active qubit");
    match ins.op {
        Op::Tick => {}
        Op::H => t.h(q(0)),
        Op::Cx => t.cx(q(0), q(1)),
        Op::ResetZ => t.reset_z(q(0), rng),
        Op::ResetX => t.reset_x(q(0), rng),
        Op::MeasureZ => record[ins.meas_index.unwrap()] = t.measure_z(q(0), rng).0,
        Op::MeasureX => record[ins.meas_index.unwrap()] = t.measure_x(q(0), rng).0,
    }
}

/// Applies Pauli X and/or Z on a dense qubit (for injected faults).
pub fn apply_pauli(t: &mut Tableau, q: usize, x: bool, z: bool) {
    if x {
        t.apply_x(q);
    }
    if z {
        t.h(q);
        t.apply_x(q);
        t.h(q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bell_pair_correlations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let mut t = Tableau::new(2);
            t.h(0);
            t.cx(0, 1);
            assert_eq!(t.peek_pauli(&[0, 1], &[]), Some(false));
            assert_eq!(t.peek_pauli(&[], &[0, 1]), Some(false));
            // YY = -XX.ZZ
            assert_eq!(t.peek_pauli(&[0, 1], &[0, 1]), Some(true));
            let (a, ra) = t.measure_z(0, &mut rng);
            let (b, rb) = t.measure_z(1, &mut rng);
            assert!(ra && !rb);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn reset_forces_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut t = Tableau::new(1);
        t.h(0);
        t.reset_z(0, &mut rng);
        assert_eq!(t.measure_z(0, &mut rng), (false, false));
        t.reset_x(0, &mut rng);
        assert_eq!(t.measure_x(0, &mut rng), (false, false));
    }
}
