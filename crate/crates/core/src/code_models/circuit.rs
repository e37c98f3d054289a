//! Pauli-frame propagation through one syndrome extraction cycle.
//!
//! Cycle order: single-qubit noise on every data and ancilla qubit, then the
//! CNOTs in schedule order (each followed by its gate noise under the
//! circuit-level model), then ancilla measurement and reset.

use super::layout::{Basis, CodeLayout};
use crate::noise::PauliTerm;

/// Pauli frame over at most 64 qubits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Frame {
    pub x: u64,
    pub z: u64,
}

impl Frame {
    #[inline]
    pub fn apply_single(&mut self, q: usize, code: u8) {
        self.x ^= u64::from(code & 1) << q;
        self.z ^= u64::from((code >> 1) & 1) << q;
    }

    #[inline]
    pub fn cnot(&mut self, c: usize, t: usize) {
        self.x ^= ((self.x >> c) & 1) << t;
        self.z ^= ((self.z >> t) & 1) << c;
    }

    /// Bits that flip a measurement in the given basis.
    #[inline]
    pub fn flips(&self, basis: Basis) -> u64 {
        match basis {
            Basis::Z => self.x,
            Basis::X => self.z,
        }
    }
}

/// Precomputed per-cycle program for a layout.
#[derive(Clone, Debug)]
pub struct CycleProgram {
    pub basis: Basis,
    pub n_data: usize,
    pub n_ancilla: usize,
    /// Global (control, target) of each CNOT in order.
    pub gates: Vec<(usize, usize)>,
    pub ancilla_mask: u64,
    /// Data masks of each stabilizer, for the final transversal readout.
    pub support_masks: Vec<u64>,
    pub observable_mask: u64,
}

impl CycleProgram {
    pub fn new(layout: &CodeLayout) -> Self {
        let gates = layout.cnots.iter().map(|c| layout.control_target(c)).collect();
        let ancilla_mask = (0..layout.n_ancilla).fold(0u64, |m, a| m | 1 << layout.ancilla_qubit(a));
        let support_masks = layout
            .stabilizers
            .iter()
            .map(|s| s.iter().fold(0u64, |m, &q| m | 1 << q))
            .collect();
        let observable_mask = layout.observable.iter().fold(0u64, |m, &q| m | 1 << q);
        CycleProgram {
            basis: layout.basis,
            n_data: layout.n_data,
            n_ancilla: layout.n_ancilla,
            gates,
            ancilla_mask,
            support_masks,
            observable_mask,
        }
    }

    pub fn n_qubit_sites(&self) -> usize {
        self.n_data + self.n_ancilla
    }

    /// Runs one cycle. `noise(site)` returns a Pauli code, zero for none: sites below
    /// `n_qubit_sites()` are qubits (one-qubit code), site `n_qubit_sites() + g` is the
    /// gate noise after CNOT `g` (two-qubit code, control first).
    /// Returns the measurement flips of the ancillas, bit `a` for ancilla `a`.
    #[inline]
    pub fn run_cycle(&self, frame: &mut Frame, mut noise: impl FnMut(usize) -> u8) -> u64 {
        let nq = self.n_qubit_sites();
        for q in 0..nq {
            let code = noise(q);
            if code != 0 {
                frame.apply_single(q, code);
            }
        }
        for (g, &(c, t)) in self.gates.iter().enumerate() {
            frame.cnot(c, t);
            let code = noise(nq + g);
            if code != 0 {
                frame.apply_single(c, code & 3);
                frame.apply_single(t, code >> 2);
            }
        }
        let meas = (frame.flips(self.basis) & self.ancilla_mask) >> self.n_data;
        frame.x &= !self.ancilla_mask;
        frame.z &= !self.ancilla_mask;
        meas
    }

    /// Final transversal readout: per-stabilizer data parities and the observable parity.
    pub fn final_readout(&self, frame: &Frame) -> (u64, bool) {
        let flips = frame.flips(self.basis);
        let mut parities = 0u64;
        for (a, m) in self.support_masks.iter().enumerate() {
            parities |= u64::from((flips & m).count_ones() & 1) << a;
        }
        (parities, (flips & self.observable_mask).count_ones() & 1 == 1)
    }
}

/// A single fault used for class derivation: which site, in which cycle, which Pauli.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InjectedFault {
    pub cycle: usize,
    /// Qubit index for qubit sites, or `n_qubits + gate` for gate sites.
    pub site: usize,
    pub term: PauliTerm,
}

/// Noiseless run of `cycles` cycles with the given faults. Returns detector rows
/// `0..=cycles` (the last from the final readout) and the observable flip.
pub fn run_with_faults(program: &CycleProgram, cycles: usize, faults: &[InjectedFault]) -> (Vec<u64>, bool) {
    let mut frame = Frame::default();
    let mut rows = Vec::with_capacity(cycles + 1);
    let mut prev = 0u64;
    for n in 0..cycles {
        let pick = |site: usize| {
            faults
                .iter()
                .filter(|f| f.cycle == n && f.site == site)
                .fold(0u8, |acc, f| acc ^ f.term.code)
        };
        let m = program.run_cycle(&mut frame, pick);
        rows.push(m ^ prev);
        prev = m;
    }
    let (parities, obs) = program.final_readout(&frame);
    rows.push(parities ^ prev);
    (rows, obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_models::layout::{build_repetition, build_rotated_surface_x};

    fn term(arity: u8, code: u8) -> PauliTerm {
        PauliTerm { arity, code }
    }

    #[test]
    fn cnot_propagation() {
        let mut f = Frame::default();
        f.apply_single(0, 1);
        f.cnot(0, 1);
        assert_eq!((f.x, f.z), (0b11, 0));
        let mut g = Frame::default();
        g.apply_single(1, 2);
        g.cnot(0, 1);
        assert_eq!((g.x, g.z), (0, 0b11));
    }

    #[test]
    fn middle_data_flip_fires_both_checks() {
        let p = CycleProgram::new(&build_repetition(3).unwrap());
        let f = InjectedFault { cycle: 1, site: 1, term: term(1, 1) };
        let (rows, obs) = run_with_faults(&p, 3, &[f]);
        assert_eq!(rows, [0, 0b11, 0, 0]);
        assert!(!obs);
    }

    #[test]
    fn ancilla_flip_is_timelike() {
        let p = CycleProgram::new(&build_repetition(3).unwrap());
        let f = InjectedFault { cycle: 1, site: 3, term: term(1, 3) };
        let (rows, _) = run_with_faults(&p, 3, &[f]);
        assert_eq!(rows, [0, 0b01, 0b01, 0]);
    }

    #[test]
    fn z_faults_are_invisible_in_z_memory() {
        let p = CycleProgram::new(&build_repetition(3).unwrap());
        for site in 0..5 {
            let f = InjectedFault { cycle: 1, site, term: term(1, 2) };
            let (rows, obs) = run_with_faults(&p, 3, &[f]);
            assert!(rows.iter().all(|&r| r == 0) && !obs);
        }
    }

    #[test]
    fn surface_corner_z_flips_observable() {
        let l = build_rotated_surface_x(3).unwrap();
        let p = CycleProgram::new(&l);
        let f = InjectedFault { cycle: 0, site: 0, term: term(1, 2) };
        let (rows, obs) = run_with_faults(&p, 2, &[f]);
        let a = l.stabilizers.iter().position(|s| s.contains(&0)).unwrap();
        assert_eq!(rows[0], 1 << a);
        assert!(rows[1..].iter().all(|&r| r == 0));
        assert!(obs);
    }

    #[test]
    fn double_fault_cancels() {
        let l = build_repetition(3).unwrap();
        let p = CycleProgram::new(&l);
        let nq = p.n_qubit_sites();
        for site in 0..nq + l.cnots.len() {
            let arity = if site < nq { 1 } else { 2 };
            for t in PauliTerm::all(arity) {
                let f = InjectedFault { cycle: 1, site, term: t };
                let (rows, obs) = run_with_faults(&p, 3, &[f, f]);
                assert!(rows.iter().all(|&r| r == 0) && !obs);
            }
        }
    }
}
