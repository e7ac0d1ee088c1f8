use num_complex::Complex64 as C;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::simulator::NativeGate;

use NativeGate::{I, X90, Xm90, Y90, Ym90};

/// Physical gate lists in time order. A full π rotation is two π/2 pulses.
const TABLE: [&[NativeGate]; 24] = [
    // Paulis
    &[I],
    &[X90, X90],
    &[Y90, Y90],
    &[Y90, Y90, X90, X90],
    // 2π/3 rotations
    &[X90, Y90],
    &[X90, Ym90],
    &[Xm90, Y90],
    &[Xm90, Ym90],
    &[Y90, X90],
    &[Y90, Xm90],
    &[Ym90, X90],
    &[Ym90, Xm90],
    // π/2 rotations
    &[X90],
    &[Xm90],
    &[Y90],
    &[Ym90],
    &[Xm90, Y90, X90],
    &[Xm90, Ym90, X90],
    // Hadamard-like
    &[X90, X90, Y90],
    &[X90, X90, Ym90],
    &[Y90, Y90, X90],
    &[Y90, Y90, Xm90],
    &[X90, Y90, X90],
    &[Xm90, Y90, Xm90],
];

/// One element of the operation in virtual-Z form: X pulses and frame updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VzGate {
    Idle,
    /// `+1` for X90, `−1` for X−90.
    XPulse(i8),
    VirtualZ(f64),
}

/// The single-qubit Clifford group over {I, X±90, Y±90}.
#[derive(Debug, Clone)]
pub struct CliffordTable {
    pub entries: Vec<Vec<NativeGate>>,
    unitaries: Vec<[C; 4]>,
    product: Vec<[usize; 24]>,
    inverse: [usize; 24],
}

fn mul(a: &[C; 4], b: &[C; 4]) -> [C; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// |tr(A†B)|/2, equal to 1 exactly when A and B agree up to a global phase.
fn overlap(a: &[C; 4], b: &[C; 4]) -> f64 {
    let t = a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2] + a[3].conj() * b[3];
    t.norm() / 2.0
}

/// Unitary of a gate list applied in time order.
pub fn sequence_unitary(gates: &[NativeGate]) -> [C; 4] {
    gates.iter().fold(I.unitary(), |acc, g| mul(&g.unitary(), &acc))
}

impl CliffordTable {
    fn build() -> Self {
        let entries: Vec<Vec<NativeGate>> = TABLE.iter().map(|e| e.to_vec()).collect();
        let unitaries: Vec<[C; 4]> = entries.iter().map(|e| sequence_unitary(e)).collect();
        let find = |u: &[C; 4]| unitaries.iter().position(|v| overlap(u, v) > 1.0 - 1e-9);
        let mut product = vec![[0usize; 24]; 24];
        let mut inverse = [0usize; 24];
        for a in 0..24 {
            for b in 0..24 {
                // Apply a, then b.
                product[a][b] = find(&mul(&unitaries[b], &unitaries[a])).expect("table is closed under products");
            }
            inverse[a] = (0..24).find(|&b| product[a][b] == 0).expect("every element has an inverse");
        }
        Self { entries, unitaries, product, inverse }
    }

    pub fn get() -> &'static CliffordTable {
        static TABLE_CELL: OnceLock<CliffordTable> = OnceLock::new();
        TABLE_CELL.get_or_init(Self::build)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn unitary(&self, index: usize) -> [C; 4] {
        self.unitaries[index]
    }

    /// Average number of physical gates per Clifford.
    pub fn avg_gate_count(&self) -> f64 {
        self.entries.iter().map(|e| e.len()).sum::<usize>() as f64 / self.entries.len() as f64
    }

    /// Index of `a` followed by `b`.
    pub fn compose(&self, a: usize, b: usize) -> usize {
        self.product[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    /// Element that returns the net operation of `sequence` to the identity.
    pub fn recovery(&self, sequence: &[usize]) -> usize {
        self.inverse(sequence.iter().fold(0, |acc, &c| self.compose(acc, c)))
    }

    /// Flattens Clifford indices (with the recovery element appended) into native gates.
    pub fn physical_sequence(&self, cliffords: &[usize]) -> Vec<NativeGate> {
        cliffords.iter().flat_map(|&c| self.entries[c].iter().copied()).collect()
    }
}

pub fn decompose_clifford(index: usize) -> Result<Vec<NativeGate>> {
    CliffordTable::get()
        .entries
        .get(index)
        .cloned()
        .ok_or_else(|| Error::config(format!("Clifford index {index} is outside 0..24")))
}

/// Rewrites Y pulses as X pulses conjugated by frame updates.
///
/// A Y pulse is an X pulse played with the frame advanced by −π/2, so it
/// becomes a frame step of −π/2, the X pulse, and a frame step of +π/2.
/// Adjacent frame steps are merged.
pub fn to_virtual_z(gates: &[NativeGate]) -> Vec<VzGate> {
    let mut out: Vec<VzGate> = Vec::new();
    let push_z = |out: &mut Vec<VzGate>, phi: f64| {
        if let Some(VzGate::VirtualZ(prev)) = out.last_mut() {
            *prev += phi;
            if prev.abs() < 1e-15 {
                out.pop();
            }
        } else {
            out.push(VzGate::VirtualZ(phi));
        }
    };
    for g in gates {
        match g {
            I => out.push(VzGate::Idle),
            X90 => out.push(VzGate::XPulse(1)),
            Xm90 => out.push(VzGate::XPulse(-1)),
            Y90 | Ym90 => {
                push_z(&mut out, -std::f64::consts::FRAC_PI_2);
                out.push(VzGate::XPulse(if *g == Y90 { 1 } else { -1 }));
                push_z(&mut out, std::f64::consts::FRAC_PI_2);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_has_24_distinct_elements() {
        let t = CliffordTable::get();
        for a in 0..24 {
            for b in 0..a {
                assert!(overlap(&t.unitary(a), &t.unitary(b)) < 0.99, "{a} and {b} coincide");
            }
        }
    }

    #[test]
    fn average_count() {
        assert!((CliffordTable::get().avg_gate_count() - 53.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn bad_index() {
        assert!(decompose_clifford(24).is_err());
    }
}
