//! Code layouts: qubits, stabilizer supports and the per-cycle CNOT schedule.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::noise::FaultLocation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeFamily {
    Repetition,
    RotatedSurfaceX,
}

/// Basis of the memory experiment, which is also the ancilla measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    Phenomenological,
    CircuitLevel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnot {
    pub data: usize,
    pub ancilla: usize,
    /// Time slot within the cycle.
    pub slot: usize,
}

/// Qubits are numbered globally with data qubits first, then ancillas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeLayout {
    pub family: CodeFamily,
    pub distance: usize,
    pub basis: Basis,
    pub n_data: usize,
    pub n_ancilla: usize,
    /// Data-qubit support of the stabilizer measured by each ancilla.
    pub stabilizers: Vec<Vec<usize>>,
    /// CNOTs of one cycle in execution order.
    pub cnots: Vec<Cnot>,
    /// Data qubits whose readout parity is the logical observable.
    pub observable: Vec<usize>,
    /// Planar coordinates of the data qubits.
    pub data_coords: Vec<(i32, i32)>,
}

pub fn build_repetition(d: usize) -> Result<CodeLayout> {
    if d < 3 || d % 2 == 0 {
        return Err(Error::config("code.distance", format!("repetition distance must be odd and >= 3, got {d}")));
    }
    if 2 * d - 1 > 64 {
        return Err(Error::config("code.distance", "at most 64 qubits are supported"));
    }
    let stabilizers: Vec<Vec<usize>> = (0..d - 1).map(|a| vec![a, a + 1]).collect();
    let cnots = (0..d - 1)
        .flat_map(|a| [(a, a), (a + 1, a)])
        .enumerate()
        .map(|(slot, (data, ancilla))| Cnot { data, ancilla, slot })
        .collect();
    let layout = CodeLayout {
        family: CodeFamily::Repetition,
        distance: d,
        basis: Basis::Z,
        n_data: d,
        n_ancilla: d - 1,
        stabilizers,
        cnots,
        observable: vec![0],
        data_coords: (0..d as i32).map(|x| (x, 0)).collect(),
    };
    layout.validate()?;
    Ok(layout)
}

/// X-check half of the rotated surface code with data qubits on a `d x d` grid.
///
/// Plaquette `(i, j)` covers data `(i..=i+1, j..=j+1)`; X plaquettes are those
/// with `i + j` even, with weight-2 boundary checks along the top and bottom.
pub fn build_rotated_surface_x(d: usize) -> Result<CodeLayout> {
    if d < 3 || d % 2 == 0 {
        return Err(Error::config("code.distance", format!("surface distance must be odd and >= 3, got {d}")));
    }
    if d * d + (d * d - 1) / 2 > 64 {
        return Err(Error::config("code.distance", "at most 64 qubits are supported"));
    }
    let di = d as i32;
    let index = |x: i32, y: i32| (y * di + x) as usize;
    let inside = |x: i32, y: i32| (0..di).contains(&x) && (0..di).contains(&y);

    let mut plaquettes = Vec::new();
    for j in -1..di {
        for i in -1..di {
            if (i + j).rem_euclid(2) != 0 {
                continue;
            }
            let bulk = (0..di - 1).contains(&i) && (0..di - 1).contains(&j);
            let edge = (j == -1 || j == di - 1) && (0..di - 1).contains(&i);
            if bulk || edge {
                plaquettes.push((i, j));
            }
        }
    }

    let mut stabilizers = Vec::new();
    let mut orders = Vec::new();
    for &(i, j) in &plaquettes {
        // Corner k of the plaquette is visited at slot k: TL, TR, BL, BR.
        let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
        let mut support = Vec::new();
        let mut order = Vec::new();
        for (k, &(x, y)) in corners.iter().enumerate() {
            if inside(x, y) {
                support.push(index(x, y));
                order.push((k, index(x, y)));
            }
        }
        support.sort_unstable();
        stabilizers.push(support);
        orders.push(order);
    }

    let mut cnots = Vec::new();
    for slot in 0..4 {
        for (a, order) in orders.iter().enumerate() {
            for &(k, data) in order {
                if k == slot {
                    cnots.push(Cnot { data, ancilla: a, slot });
                }
            }
        }
    }

    let layout = CodeLayout {
        family: CodeFamily::RotatedSurfaceX,
        distance: d,
        basis: Basis::X,
        n_data: d * d,
        n_ancilla: plaquettes.len(),
        stabilizers,
        cnots,
        observable: (0..di).map(|y| index(0, y)).collect(),
        data_coords: (0..di).flat_map(|y| (0..di).map(move |x| (x, y))).collect(),
    };
    layout.validate()?;
    Ok(layout)
}

impl CodeLayout {
    pub fn n_qubits(&self) -> usize {
        self.n_data + self.n_ancilla
    }

    pub fn ancilla_qubit(&self, a: usize) -> usize {
        self.n_data + a
    }

    /// Global (control, target) qubits of a CNOT.
    pub fn control_target(&self, c: &Cnot) -> (usize, usize) {
        let anc = self.ancilla_qubit(c.ancilla);
        match self.basis {
            Basis::Z => (c.data, anc),
            Basis::X => (anc, c.data),
        }
    }

    pub fn detectors_per_cycle(&self) -> usize {
        self.n_ancilla
    }

    /// All fault locations the noise model places in one cycle, in site order.
    pub fn fault_locations(&self, model: NoiseModel) -> Vec<FaultLocation> {
        let mut locs: Vec<FaultLocation> = (0..self.n_data)
            .map(FaultLocation::Data)
            .chain((0..self.n_ancilla).map(FaultLocation::Ancilla))
            .collect();
        if model == NoiseModel::CircuitLevel {
            locs.extend((0..self.cnots.len()).map(FaultLocation::Gate));
        }
        locs
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits() > 64 {
            return Err(Error::config("code", "at most 64 qubits are supported"));
        }
        if self.stabilizers.len() != self.n_ancilla {
            return Err(Error::config("code", "one stabilizer per ancilla required"));
        }
        let mut used = std::collections::HashSet::new();
        for c in &self.cnots {
            if c.data >= self.n_data || c.ancilla >= self.n_ancilla {
                return Err(Error::config("code", "CNOT qubit out of range"));
            }
            if !self.stabilizers[c.ancilla].contains(&c.data) {
                return Err(Error::config("code", "CNOT outside stabilizer support"));
            }
            if !used.insert((c.slot, c.data)) || !used.insert((c.slot, self.n_data + c.ancilla)) {
                return Err(Error::config("code", format!("qubit used twice in slot {}", c.slot)));
            }
        }
        for (a, s) in self.stabilizers.iter().enumerate() {
            let n = self.cnots.iter().filter(|c| c.ancilla == a).count();
            if n != s.len() {
                return Err(Error::config("code", format!("stabilizer {a} not fully scheduled")));
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("layout serializes");
        Sha256::digest(&bytes).into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repetition_sizes() {
        let l = build_repetition(3).unwrap();
        assert_eq!((l.n_data, l.n_ancilla, l.cnots.len()), (3, 2, 4));
        let pairs: Vec<(usize, usize)> = l.cnots.iter().map(|c| (c.data, c.ancilla)).collect();
        assert_eq!(pairs, [(0, 0), (1, 0), (1, 1), (2, 1)]);
        let l5 = build_repetition(5).unwrap();
        assert_eq!((l5.n_data, l5.n_ancilla, l5.cnots.len()), (5, 4, 8));
        assert!(build_repetition(2).is_err());
        assert!(build_repetition(4).is_err());
    }

    #[test]
    fn surface_d3_supports() {
        let l = build_rotated_surface_x(3).unwrap();
        assert_eq!((l.n_data, l.n_ancilla), (9, 4));
        let mut weights: Vec<usize> = l.stabilizers.iter().map(Vec::len).collect();
        weights.sort_unstable();
        assert_eq!(weights, [2, 2, 4, 4]);
        let mut supports = l.stabilizers.clone();
        supports.sort();
        // index = 3y + x
        assert_eq!(supports, vec![vec![0, 1, 3, 4], vec![1, 2], vec![4, 5, 7, 8], vec![6, 7]]);
        assert_eq!(l.observable, [0, 3, 6]);
        assert!(build_rotated_surface_x(4).is_err());
    }

    #[test]
    fn surface_d5_counts() {
        let l = build_rotated_surface_x(5).unwrap();
        assert_eq!((l.n_data, l.n_ancilla), (25, 12));
    }

    #[test]
    fn observable_commutes_with_checks_of_other_type() {
        // A Z-type logical along the top row must touch every X-check an even number of times.
        let l = build_rotated_surface_x(3).unwrap();
        let row: Vec<usize> = vec![0, 1, 2];
        for s in &l.stabilizers {
            assert_eq!(s.iter().filter(|q| row.contains(q)).count() % 2, 0);
        }
        assert_eq!(row.iter().filter(|q| l.observable.contains(q)).count() % 2, 1);
    }

    #[test]
    fn fault_location_lists() {
        let l = build_repetition(3).unwrap();
        assert_eq!(l.fault_locations(NoiseModel::Phenomenological).len(), 5);
        assert_eq!(l.fault_locations(NoiseModel::CircuitLevel).len(), 9);
    }
}
