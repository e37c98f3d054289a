//! Pauli-frame Monte-Carlo simulation of memory experiments.
//!
//! Detector rows are bit-packed, one row of `ceil(D/8)` bytes per cycle. Row
//! `n < N` compares the ancilla measurements of cycles `n` and `n-1`; the final
//! row compares the last measurements with the transversal data readout.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code_models::{CodeLayout, CycleProgram, Frame, NoiseModel};
use crate::error::{Error, Result};
use crate::noise::{FaultLocation, NoiseAssignment};
use crate::rng::ShotRng;

const MAGIC: &[u8; 4] = b"DDEM";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 8 + 4 + 8 + 8 + 32 + 32;

/// Default cap on `S * N * D` detector bits held in memory (1 GiB).
pub const DEFAULT_MEMORY_BUDGET_BITS: u64 = 8 << 30;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryConfig {
    pub cycles: usize,
    pub shots: usize,
    pub seed: u64,
    /// Absolute cycle index of the first simulated cycle, used to evaluate drift.
    pub start_cycle: u64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub memory_budget_bits: u64,
}

impl MemoryConfig {
    pub fn new(cycles: usize, shots: usize, seed: u64) -> Self {
        MemoryConfig {
            cycles,
            shots,
            seed,
            start_cycle: 0,
            threads: 0,
            memory_budget_bits: DEFAULT_MEMORY_BUDGET_BITS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataMeta {
    pub seed: u64,
    pub start_cycle: u64,
    pub layout_hash: [u8; 32],
    pub assignment_hash: [u8; 32],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DetectionData {
    pub shots: usize,
    pub cycles: usize,
    pub detectors: usize,
    row_bytes: usize,
    rows: Vec<u8>,
    finals: Vec<u8>,
    observables: Vec<u8>,
    pub meta: DataMeta,
}

impl DetectionData {
    fn zeroed(shots: usize, cycles: usize, detectors: usize, meta: DataMeta) -> Self {
        let row_bytes = detectors.div_ceil(8);
        DetectionData {
            shots,
            cycles,
            detectors,
            row_bytes,
            rows: vec![0; shots * cycles * row_bytes],
            finals: vec![0; shots * row_bytes],
            observables: vec![0; shots],
            meta,
        }
    }

    /// Builds data from unpacked rows, indexed `[shot][row]` with `cycles + 1` rows per shot.
    pub fn from_rows(detectors: usize, rows: &[Vec<u64>], observables: &[bool], meta: DataMeta) -> Result<Self> {
        if detectors == 0 || detectors > 64 {
            return Err(Error::data("detector count must be in 1..=64"));
        }
        if rows.is_empty() || rows.len() != observables.len() {
            return Err(Error::data("shot count mismatch"));
        }
        let n_rows = rows[0].len();
        if n_rows < 2 || rows.iter().any(|r| r.len() != n_rows) {
            return Err(Error::data("every shot needs the same number of rows (at least 2)"));
        }
        let mut d = DetectionData::zeroed(rows.len(), n_rows - 1, detectors, meta);
        for (s, shot) in rows.iter().enumerate() {
            for (n, &bits) in shot.iter().enumerate() {
                d.set_row(s, n, bits);
            }
            d.observables[s] = u8::from(observables[s]);
        }
        Ok(d)
    }

    pub fn row_bytes(&self) -> usize {
        self.row_bytes
    }

    fn row_slice(&self, s: usize, n: usize) -> &[u8] {
        let rb = self.row_bytes;
        if n == self.cycles {
            &self.finals[s * rb..(s + 1) * rb]
        } else {
            let i = (s * self.cycles + n) * rb;
            &self.rows[i..i + rb]
        }
    }

    fn set_row(&mut self, s: usize, n: usize, bits: u64) {
        let rb = self.row_bytes;
        let dst = if n == self.cycles {
            &mut self.finals[s * rb..(s + 1) * rb]
        } else {
            let i = (s * self.cycles + n) * rb;
            &mut self.rows[i..i + rb]
        };
        dst.copy_from_slice(&bits.to_le_bytes()[..rb]);
    }

    /// Detector bits of row `n` (`0..=cycles`) of shot `s`, bit `d` for detector `d`.
    #[inline]
    pub fn row(&self, s: usize, n: usize) -> u64 {
        let mut buf = [0u8; 8];
        buf[..self.row_bytes].copy_from_slice(self.row_slice(s, n));
        u64::from_le_bytes(buf)
    }

    #[inline]
    pub fn bit(&self, s: usize, n: usize, d: usize) -> bool {
        (self.row(s, n) >> d) & 1 == 1
    }

    pub fn observable(&self, s: usize) -> bool {
        self.observables[s] != 0
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&(self.shots as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.cycles as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.detectors as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&self.meta.seed.to_le_bytes()).map_err(io)?;
        w.write_all(&self.meta.start_cycle.to_le_bytes()).map_err(io)?;
        w.write_all(&self.meta.layout_hash).map_err(io)?;
        w.write_all(&self.meta.assignment_hash).map_err(io)?;
        w.write_all(&self.rows).map_err(io)?;
        w.write_all(&self.finals).map_err(io)?;
        w.write_all(&self.observables).map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut bytes = Vec::new();
        BufReader::new(file).read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::data("detection file shorter than its header"));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::data("bad magic, not a detection file"));
        }
        let u16_at = |i: usize| u16::from_le_bytes(bytes[i..i + 2].try_into().unwrap());
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::data(format!("unsupported detection file version {version}")));
        }
        let shots = u64_at(6);
        let cycles = u64_at(14);
        let detectors = u32_at(22) as usize;
        let seed = u64_at(26);
        let start_cycle = u64_at(34);
        let layout_hash: [u8; 32] = bytes[42..74].try_into().unwrap();
        let assignment_hash: [u8; 32] = bytes[74..106].try_into().unwrap();
        if detectors == 0 || detectors > 64 {
            return Err(Error::data(format!("detector count {detectors} outside 1..=64")));
        }
        if shots == 0 || cycles == 0 {
            return Err(Error::data("detection file with zero shots or cycles"));
        }
        let rb = detectors.div_ceil(8) as u64;
        let expected = shots
            .checked_mul(cycles)
            .and_then(|x| x.checked_mul(rb))
            .and_then(|x| x.checked_add(shots * rb + shots))
            .ok_or_else(|| Error::data("header dimensions overflow"))?;
        let payload = (bytes.len() - HEADER_LEN) as u64;
        if payload != expected {
            return Err(Error::data(format!(
                "payload length {payload} does not match header dimensions ({expected} expected)"
            )));
        }
        let (shots, cycles, rb) = (shots as usize, cycles as usize, rb as usize);
        let mut at = HEADER_LEN;
        let rows = bytes[at..at + shots * cycles * rb].to_vec();
        at += rows.len();
        let finals = bytes[at..at + shots * rb].to_vec();
        at += finals.len();
        let observables = bytes[at..].to_vec();
        if observables.iter().any(|&b| b > 1) {
            return Err(Error::data("observable bytes must be 0 or 1"));
        }
        Ok(DetectionData {
            shots,
            cycles,
            detectors,
            row_bytes: rb,
            rows,
            finals,
            observables,
            meta: DataMeta {
                seed,
                start_cycle,
                layout_hash,
                assignment_hash,
            },
        })
    }
}

pub fn write_detections(data: &DetectionData, path: &Path) -> Result<()> {
    data.write(path)
}

pub fn read_detections(path: &Path) -> Result<DetectionData> {
    DetectionData::read(path)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    /// (cycle, location) pairs whose rate had to be clamped into [0, 1].
    pub clamp_events: u64,
}

/// Fixed-point firing threshold: a site fires when its uniform draw is below `g * 2^64`.
fn threshold(g: f64) -> u64 {
    if g >= 1.0 {
        u64::MAX
    } else {
        (g * 18_446_744_073_709_551_616.0) as u64
    }
}

#[inline]
fn pick_term(r: u64, thr: u64, terms: u128) -> u8 {
    if r >= thr {
        return 0;
    }
    (1 + (u128::from(r) * terms) / u128::from(thr)) as u8
}

pub fn run_memory(
    layout: &CodeLayout,
    assignment: &NoiseAssignment,
    model: NoiseModel,
    config: &MemoryConfig,
) -> Result<(DetectionData, SimReport)> {
    if config.cycles < 2 {
        return Err(Error::config("cycles", "at least 2 cycles are required"));
    }
    if config.shots == 0 {
        return Err(Error::config("shots", "at least 1 shot is required"));
    }
    let locations = layout.fault_locations(model);
    assignment.check_covers(&locations)?;
    let detectors = layout.detectors_per_cycle();
    let bits = (config.shots as u128) * (config.cycles as u128 + 1) * (detectors as u128);
    if bits > u128::from(config.memory_budget_bits) {
        return Err(Error::config(
            "memory_budget_bits",
            format!("{bits} detector bits exceed the budget of {}", config.memory_budget_bits),
        ));
    }

    let program = CycleProgram::new(layout);
    let nq = program.n_qubit_sites();
    let sites = locations.len();
    let mut clamp_events = 0u64;
    let mut table = Vec::with_capacity(config.cycles * sites);
    for n in 0..config.cycles {
        for &loc in &locations {
            let (g, clamped) = assignment.get(loc).unwrap().profile.sample_rate_checked(config.start_cycle + n as u64);
            clamp_events += u64::from(clamped);
            table.push(threshold(g));
        }
    }
    let gate_terms = locations.iter().any(|l| matches!(l, FaultLocation::Gate(_)));

    let meta = DataMeta {
        seed: config.seed,
        start_cycle: config.start_cycle,
        layout_hash: layout.hash(),
        assignment_hash: assignment.hash(),
    };
    let mut data = DetectionData::zeroed(config.shots, config.cycles, detectors, meta);
    let rb = data.row_bytes;
    let cycles = config.cycles;
    let seed = config.seed;

    let simulate = |data: &mut DetectionData| {
        data.rows
            .par_chunks_mut(cycles * rb)
            .zip(data.finals.par_chunks_mut(rb))
            .zip(data.observables.par_iter_mut())
            .enumerate()
            .for_each(|(s, ((rows, fin), obs))| {
                let mut rng = ShotRng::new(seed, s as u64);
                let mut frame = Frame::default();
                let mut prev = 0u64;
                for n in 0..cycles {
                    let thr = &table[n * sites..(n + 1) * sites];
                    let m = program.run_cycle(&mut frame, |site| {
                        if site < nq {
                            pick_term(rng.next_u64(), thr[site], 3)
                        } else if gate_terms {
                            pick_term(rng.next_u64(), thr[site], 15)
                        } else {
                            0
                        }
                    });
                    rows[n * rb..(n + 1) * rb].copy_from_slice(&(m ^ prev).to_le_bytes()[..rb]);
                    prev = m;
                }
                let (parities, o) = program.final_readout(&frame);
                fin.copy_from_slice(&(parities ^ prev).to_le_bytes()[..rb]);
                *obs = u8::from(o);
            });
    };

    if config.threads == 0 {
        simulate(&mut data);
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::config("threads", e.to_string()))?;
        pool.install(|| simulate(&mut data));
    }
    Ok((data, SimReport { clamp_events }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_models::{build_repetition, build_rotated_surface_x};
    use crate::noise::DriftProfile;

    fn uniform(layout: &CodeLayout, model: NoiseModel, g: f64) -> NoiseAssignment {
        let mut a = NoiseAssignment::new();
        for loc in layout.fault_locations(model) {
            a.set(loc, DriftProfile::constant(g).unwrap());
        }
        a
    }

    #[test]
    fn zero_noise_is_silent() {
        for layout in [build_repetition(3).unwrap(), build_rotated_surface_x(3).unwrap()] {
            for model in [NoiseModel::Phenomenological, NoiseModel::CircuitLevel] {
                let a = uniform(&layout, model, 0.0);
                let (d, _) = run_memory(&layout, &a, model, &MemoryConfig::new(20, 7, 1)).unwrap();
                for s in 0..d.shots {
                    assert!(!d.observable(s));
                    for n in 0..=d.cycles {
                        assert_eq!(d.row(s, n), 0);
                    }
                }
            }
        }
    }

    #[test]
    fn full_noise_thresholds() {
        assert_eq!(threshold(0.0), 0);
        assert_eq!(threshold(1.0), u64::MAX);
        assert_eq!(pick_term(0, 0, 3), 0);
        assert_eq!(pick_term(0, threshold(0.5), 3), 1);
        assert_eq!(pick_term(threshold(0.5) - 1, threshold(0.5), 3), 3);
        assert_eq!(pick_term(threshold(0.5) - 1, threshold(0.5), 15), 15);
    }

    #[test]
    fn rejects_bad_config() {
        let l = build_repetition(3).unwrap();
        let a = uniform(&l, NoiseModel::Phenomenological, 0.1);
        assert!(run_memory(&l, &a, NoiseModel::Phenomenological, &MemoryConfig::new(1, 5, 0)).is_err());
        assert!(run_memory(&l, &a, NoiseModel::Phenomenological, &MemoryConfig::new(10, 0, 0)).is_err());
        let mut c = MemoryConfig::new(100, 100, 0);
        c.memory_budget_bits = 1000;
        assert!(run_memory(&l, &a, NoiseModel::Phenomenological, &c).is_err());
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let l = build_repetition(3).unwrap();
        let a = uniform(&l, NoiseModel::CircuitLevel, 0.05);
        let mut c = MemoryConfig::new(50, 40, 9);
        c.threads = 1;
        let (d1, _) = run_memory(&l, &a, NoiseModel::CircuitLevel, &c).unwrap();
        c.threads = 4;
        let (d4, _) = run_memory(&l, &a, NoiseModel::CircuitLevel, &c).unwrap();
        assert_eq!(d1, d4);
    }

    #[test]
    fn file_round_trip_and_corruption() {
        let l = build_rotated_surface_x(3).unwrap();
        let a = uniform(&l, NoiseModel::Phenomenological, 0.1);
        let (d, _) = run_memory(&l, &a, NoiseModel::Phenomenological, &MemoryConfig::new(30, 5, 3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ddem");
        write_detections(&d, &path).unwrap();
        assert_eq!(read_detections(&path).unwrap(), d);

        let bytes = std::fs::read(&path).unwrap();
        assert!(DetectionData::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(DetectionData::from_bytes(&bad).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(DetectionData::from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[22..26].copy_from_slice(&0u32.to_le_bytes());
        assert!(DetectionData::from_bytes(&bad).is_err());
    }
}
