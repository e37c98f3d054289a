//! Code layouts, syndrome extraction circuits and edge-class derivation.

pub mod circuit;
pub mod classes;
pub mod layout;

pub use circuit::{CycleProgram, Frame};
pub use classes::{
    class_probability, derive_edge_classes, ground_truth_edge_series, ground_truth_series, Contribution,
    DetectorOffset, EdgeClass, EdgeKind,
};
pub use layout::{build_repetition, build_rotated_surface_x, Basis, Cnot, CodeFamily, CodeLayout, NoiseModel};
