//! Edge classes: time-translation-invariant error mechanisms found by
//! propagating every single fault through a short noiseless run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::circuit::{run_with_faults, CycleProgram, InjectedFault};
use super::layout::{CodeLayout, NoiseModel};
use crate::error::{Error, Result};
use crate::noise::{FaultLocation, NoiseAssignment, PauliTerm};

const PROBE_CYCLES: usize = 5;
const PROBE_CYCLE: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    TimeLike,
    BulkSpace,
    BoundarySpace,
    Diagonal,
}

impl EdgeKind {
    pub fn is_boundary(self) -> bool {
        self == EdgeKind::BoundarySpace
    }
}

/// Detector relative to a class instance's anchor row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectorOffset {
    pub ancilla: usize,
    pub offset: usize,
}

/// One fault location feeding a class. The fault happens `shift` cycles after the anchor
/// (so `shift <= 0`) and hits the class with `fraction` of the location's rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub location: FaultLocation,
    pub shift: i64,
    pub multiplicity: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeClass {
    pub id: usize,
    pub kind: EdgeKind,
    /// One or two detectors, sorted; the first has offset 0.
    pub signature: Vec<DetectorOffset>,
    pub flips_observable: bool,
    pub contributions: Vec<Contribution>,
}

impl EdgeClass {
    pub fn max_offset(&self) -> usize {
        self.signature.iter().map(|d| d.offset).max().unwrap_or(0)
    }

    pub fn label(&self) -> String {
        let dets: Vec<String> = self
            .signature
            .iter()
            .map(|d| format!("a{}@{}", d.ancilla + 1, d.offset))
            .collect();
        format!("{:?}[{}]", self.kind, dets.join(","))
    }
}

fn classify(sig: &[DetectorOffset]) -> EdgeKind {
    match sig {
        [_] => EdgeKind::BoundarySpace,
        [a, b] if a.ancilla == b.ancilla => EdgeKind::TimeLike,
        [a, b] if a.offset == b.offset => EdgeKind::BulkSpace,
        _ => EdgeKind::Diagonal,
    }
}

/// Derives all edge classes for `layout` under `model`. Zero-rate locations still
/// contribute structure, so the class list depends only on which locations exist.
pub fn derive_edge_classes(
    layout: &CodeLayout,
    assignment: &NoiseAssignment,
    model: NoiseModel,
) -> Result<Vec<EdgeClass>> {
    let locations = layout.fault_locations(model);
    assignment.check_covers(&locations)?;
    let program = CycleProgram::new(layout);
    let nq = program.n_qubit_sites();

    struct Acc {
        flips_observable: bool,
        contrib: BTreeMap<(FaultLocation, i64), usize>,
    }
    let mut groups: BTreeMap<Vec<DetectorOffset>, Acc> = BTreeMap::new();

    for (site, &loc) in locations.iter().enumerate() {
        let arity = if site < nq { 1 } else { 2 };
        for term in PauliTerm::all(arity) {
            let fault = InjectedFault { cycle: PROBE_CYCLE, site, term };
            let (rows, obs) = run_with_faults(&program, PROBE_CYCLES, &[fault]);
            let mut fired = Vec::new();
            for (r, &bits) in rows.iter().enumerate() {
                for a in 0..layout.n_ancilla {
                    if (bits >> a) & 1 == 1 {
                        fired.push((r, a));
                    }
                }
            }
            if fired.is_empty() {
                if obs {
                    return Err(Error::data(format!(
                        "fault {term} at {loc} flips the observable without firing any detector"
                    )));
                }
                continue;
            }
            if fired.len() > 2 {
                return Err(Error::data(format!(
                    "fault {term} at {loc} fires {} detectors; only graph-like models are supported",
                    fired.len()
                )));
            }
            let anchor = fired.iter().map(|&(r, _)| r).min().unwrap();
            let mut sig: Vec<DetectorOffset> = fired
                .iter()
                .map(|&(r, a)| DetectorOffset { ancilla: a, offset: r - anchor })
                .collect();
            sig.sort();
            let shift = PROBE_CYCLE as i64 - anchor as i64;
            let acc = groups.entry(sig).or_insert(Acc {
                flips_observable: obs,
                contrib: BTreeMap::new(),
            });
            if acc.flips_observable != obs {
                return Err(Error::data(format!(
                    "faults with the same detector signature disagree on the observable (at {loc})"
                )));
            }
            *acc.contrib.entry((loc, shift)).or_insert(0) += 1;
        }
    }

    let mut classes: Vec<EdgeClass> = groups
        .into_iter()
        .map(|(signature, acc)| EdgeClass {
            id: 0,
            kind: classify(&signature),
            contributions: acc
                .contrib
                .into_iter()
                .map(|((location, shift), multiplicity)| {
                    let arity = assignment.get(location).expect("covered").kind.arity();
                    Contribution {
                        location,
                        shift,
                        multiplicity,
                        fraction: multiplicity as f64 / f64::from(PauliTerm::count(arity)),
                    }
                })
                .collect(),
            signature,
            flips_observable: acc.flips_observable,
        })
        .collect();
    classes.sort_by(|a, b| (a.kind, &a.signature).cmp(&(b.kind, &b.signature)));
    for (i, c) in classes.iter_mut().enumerate() {
        c.id = i;
    }
    Ok(classes)
}

/// Probability that an odd number of the contributing faults occurs for a class
/// instance anchored at local cycle `anchor` of an experiment with `cycles` cycles
/// whose first cycle has absolute index `start_cycle`.
pub fn class_probability(
    class: &EdgeClass,
    assignment: &NoiseAssignment,
    start_cycle: u64,
    cycles: usize,
    anchor: usize,
) -> f64 {
    let mut prod = 1.0;
    for c in &class.contributions {
        let fault_cycle = anchor as i64 + c.shift;
        if fault_cycle < 0 || fault_cycle >= cycles as i64 {
            continue;
        }
        let entry = assignment.get(c.location).expect("assignment covers classes");
        let g = entry.profile.sample_rate(start_cycle + fault_cycle as u64);
        prod *= 1.0 - 2.0 * c.fraction * g;
    }
    0.5 * (1.0 - prod)
}

/// Ground-truth per-class probabilities at absolute cycle `n`, far from the experiment edges.
pub fn ground_truth_edge_series(classes: &[EdgeClass], assignment: &NoiseAssignment, n: u64) -> Vec<f64> {
    classes
        .iter()
        .map(|c| {
            let mut prod = 1.0;
            for k in &c.contributions {
                let cycle = n as i64 + k.shift;
                if cycle < 0 {
                    continue;
                }
                let g = assignment.get(k.location).expect("covered").profile.sample_rate(cycle as u64);
                prod *= 1.0 - 2.0 * k.fraction * g;
            }
            0.5 * (1.0 - prod)
        })
        .collect()
}

/// Ground-truth series for anchors `0..cycles` of an experiment, indexed `[class][anchor]`.
pub fn ground_truth_series(
    classes: &[EdgeClass],
    assignment: &NoiseAssignment,
    start_cycle: u64,
    cycles: usize,
) -> Vec<Vec<f64>> {
    classes
        .iter()
        .map(|c| {
            (0..cycles)
                .map(|n| class_probability(c, assignment, start_cycle, cycles, n))
                .collect()
        })
        .collect()
}
