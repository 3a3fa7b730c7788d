//! Labeled ground-state datasets, their JSON manifest, and binary state shards.
//!
//! Shard layout: consecutive records, each `2^N` amplitudes stored as
//! little-endian `f64` pairs `(re, im)`. A record's `shard_offset` counts
//! records, not bytes. The manifest keeps each state's squared norm, which is
//! checked when the record is read back.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solver::{ground_state, Solver};
use super::{label_point, nn_xx, string_order, HamiltonianSpec, LabelThresholds, PhaseLabel};
use crate::error::{Error, Result};
use crate::statevec::StateVector;

pub const MANIFEST_SCHEMA: &str = "swapattn.manifest/1";

/// Inclusive rectangular grid over (h1, h2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub h1: [f64; 2],
    pub h2: [f64; 2],
    /// Points along h1 and along h2.
    pub shape: [usize; 2],
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            h1: [0.0, 1.6],
            h2: [-1.6, 1.6],
            shape: [50, 50],
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn h1_values(&self) -> Vec<f64> {
        linspace(self.h1[0], self.h1[1], self.shape[0])
    }

    pub fn h2_values(&self) -> Vec<f64> {
        linspace(self.h2[0], self.h2[1], self.shape[1])
    }

    /// Grid points in record order: h1 outer, h2 inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let h2s = self.h2_values();
        self.h1_values()
            .into_iter()
            .flat_map(|a| h2s.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape[0] == 0 || self.shape[1] == 0 {
            return Err(Error::Config("grid shape must be positive along both axes".into()));
        }
        if ![self.h1, self.h2].iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::Config("grid ranges must be finite".into()));
        }
        Ok(())
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Per-record seed derived from the master seed by a SplitMix64 step.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_sites: usize,
    pub grid: GridSpec,
    pub seed: u64,
    pub thresholds: LabelThresholds,
    #[serde(with = "solver_serde")]
    pub solver: Solver,
    /// Keep statevectors on the records after generation.
    pub keep_states: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_sites: 9,
            grid: GridSpec::default(),
            seed: 2024,
            thresholds: LabelThresholds::default(),
            solver: Solver::Auto,
            keep_states: true,
        }
    }
}

mod solver_serde {
    use super::Solver;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: &Solver, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(match s {
            Solver::Auto => "auto",
            Solver::Dense => "dense",
            Solver::Lanczos => "lanczos",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Solver, D::Error> {
        match String::deserialize(de)?.as_str() {
            "auto" => Ok(Solver::Auto),
            "dense" => Ok(Solver::Dense),
            "lanczos" => Ok(Solver::Lanczos),
            other => Err(serde::de::Error::custom(format!("unknown solver {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroundStateRecord {
    pub h1: f64,
    pub h2: f64,
    pub energy: f64,
    pub gap: f64,
    pub string_order: f64,
    pub nn_xx: f64,
    pub label: PhaseLabel,
    pub seed: u64,
    pub state: Option<StateVector<f64>>,
}

impl GroundStateRecord {
    /// Solves and labels one grid point.
    pub fn compute(
        n_sites: usize,
        h1: f64,
        h2: f64,
        seed: u64,
        thresholds: &LabelThresholds,
        solver: Solver,
    ) -> Result<Self> {
        let spec = HamiltonianSpec::new(n_sites, h1, h2)?;
        let g = ground_state(&spec, seed, solver).map_err(|e| Error::AtGridPoint {
            h1,
            h2,
            source: Box::new(e),
        })?;
        let s = string_order(&g.state, n_sites)?;
        let xx = nn_xx(&g.state, n_sites)?;
        Ok(Self {
            h1,
            h2,
            energy: g.energy,
            gap: g.gap,
            string_order: s,
            nn_xx: xx,
            label: label_point(s, xx, thresholds),
            seed,
            state: Some(g.state),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub records: Vec<GroundStateRecord>,
}

/// Solves every grid point in parallel. Deterministic in `config`.
pub fn generate_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.grid.validate()?;
    config.thresholds.validate()?;
    HamiltonianSpec::new(config.n_sites, 0.0, 0.0)?;
    let points = config.grid.points();
    let records = points
        .par_iter()
        .enumerate()
        .map(|(k, &(h1, h2))| {
            let mut r = GroundStateRecord::compute(
                config.n_sites,
                h1,
                h2,
                derive_seed(config.seed, k as u64),
                &config.thresholds,
                config.solver,
            )?;
            if !config.keep_states {
                r.state = None;
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        config: *config,
        records,
    })
}

/// Recomputes a record's statevector from its coordinates and seed.
pub fn regenerate_state(config: &DatasetConfig, h1: f64, h2: f64, seed: u64) -> Result<StateVector<f64>> {
    let spec = HamiltonianSpec::new(config.n_sites, h1, h2)?;
    Ok(ground_state(&spec, seed, config.solver)
        .map_err(|e| Error::AtGridPoint {
            h1,
            h2,
            source: Box::new(e),
        })?
        .state)
}

impl Dataset {
    /// Statevector of record `k`, regenerated when not cached.
    pub fn state(&self, k: usize) -> Result<StateVector<f64>> {
        let r = self
            .records
            .get(k)
            .ok_or_else(|| Error::Missing(format!("record {k}")))?;
        match &r.state {
            Some(s) => Ok(s.clone()),
            None => regenerate_state(&self.config, r.h1, r.h2, r.seed),
        }
    }

    pub fn label_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.records {
            c[r.label.index()] += 1;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub h1: f64,
    pub h2: f64,
    pub label: PhaseLabel,
    pub string_order: f64,
    pub nn_xx: f64,
    pub energy: f64,
    pub gap: f64,
    pub seed: u64,
    pub shard_offset: Option<u64>,
    pub norm_sqr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    pub config_digest: String,
    pub n_sites: usize,
    pub coupling: f64,
    pub dataset: DatasetConfig,
    pub shard_file: Option<String>,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    /// Builds the manifest; when `shard_file` is given, offsets follow record order.
    pub fn new(dataset: &Dataset, config_digest: &str, shard_file: Option<String>) -> Self {
        let records = dataset
            .records
            .iter()
            .enumerate()
            .map(|(k, r)| ManifestRecord {
                h1: r.h1,
                h2: r.h2,
                label: r.label,
                string_order: r.string_order,
                nn_xx: r.nn_xx,
                energy: r.energy,
                gap: r.gap,
                seed: r.seed,
                shard_offset: shard_file.as_ref().and(r.state.as_ref()).map(|_| k as u64),
                norm_sqr: shard_file
                    .as_ref()
                    .and(r.state.as_ref())
                    .map(|s| s.norm_sqr()),
            })
            .collect();
        Self {
            schema_version: MANIFEST_SCHEMA.to_string(),
            config_digest: config_digest.to_string(),
            n_sites: dataset.config.n_sites,
            coupling: 1.0,
            dataset: dataset.config,
            shard_file,
            records,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.schema_version != MANIFEST_SCHEMA {
            return Err(Error::Compatibility(format!(
                "manifest schema {} (expected {MANIFEST_SCHEMA})",
                m.schema_version
            )));
        }
        Ok(m)
    }

    /// Rebuilds a dataset without statevectors; states regenerate on demand.
    pub fn to_dataset(&self) -> Dataset {
        let mut config = self.dataset;
        config.keep_states = false;
        Dataset {
            config,
            records: self
                .records
                .iter()
                .map(|r| GroundStateRecord {
                    h1: r.h1,
                    h2: r.h2,
                    energy: r.energy,
                    gap: r.gap,
                    string_order: r.string_order,
                    nn_xx: r.nn_xx,
                    label: r.label,
                    seed: r.seed,
                    state: None,
                })
                .collect(),
        }
    }

    /// Dataset with states loaded from the shard next to `manifest_path`,
    /// or regenerated when the manifest has no shard.
    pub fn load_dataset(&self, manifest_path: &Path, with_states: bool) -> Result<Dataset> {
        let mut ds = self.to_dataset();
        if !with_states {
            return Ok(ds);
        }
        match &self.shard_file {
            Some(name) => {
                let dir = manifest_path.parent().unwrap_or(Path::new("."));
                let mut reader = ShardReader::open(&dir.join(name), self.n_sites)?;
                for (rec, m) in ds.records.iter_mut().zip(&self.records) {
                    let (off, norm) = m
                        .shard_offset
                        .zip(m.norm_sqr)
                        .ok_or_else(|| Error::Missing(format!("shard entry for ({}, {})", m.h1, m.h2)))?;
                    rec.state = Some(reader.read(off, norm)?);
                }
            }
            None => {
                let states = ds
                    .records
                    .par_iter()
                    .map(|r| regenerate_state(&ds.config, r.h1, r.h2, r.seed))
                    .collect::<Result<Vec<_>>>()?;
                for (r, s) in ds.records.iter_mut().zip(states) {
                    r.state = Some(s);
                }
            }
        }
        ds.config.keep_states = true;
        Ok(ds)
    }
}

pub struct ShardWriter {
    path: PathBuf,
    out: BufWriter<File>,
    n_qubits: usize,
    count: u64,
}

impl ShardWriter {
    pub fn create(path: &Path, n_qubits: usize) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(f),
            n_qubits,
            count: 0,
        })
    }

    /// Appends a state; returns its record offset.
    pub fn append(&mut self, s: &StateVector<f64>) -> Result<u64> {
        if s.n_qubits() != self.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                actual: s.n_qubits(),
            });
        }
        for a in s.amplitudes() {
            self.out
                .write_all(&a.re.to_le_bytes())
                .and_then(|_| self.out.write_all(&a.im.to_le_bytes()))
                .map_err(|e| Error::io(&self.path, e))?;
        }
        self.count += 1;
        Ok(self.count - 1)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub struct ShardReader {
    path: PathBuf,
    input: BufReader<File>,
    n_qubits: usize,
}

impl ShardReader {
    pub fn open(path: &Path, n_qubits: usize) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            input: BufReader::new(f),
            n_qubits,
        })
    }

    /// Reads record `offset` and checks its squared norm against `expected_norm_sqr`.
    pub fn read(&mut self, offset: u64, expected_norm_sqr: f64) -> Result<StateVector<f64>> {
        let dim = 1usize << self.n_qubits;
        let bytes = (dim * 16) as u64;
        self.input
            .seek(SeekFrom::Start(offset * bytes))
            .map_err(|e| Error::io(&self.path, e))?;
        let mut buf = vec![0u8; dim * 16];
        self.input
            .read_exact(&mut buf)
            .map_err(|e| Error::io(&self.path, e))?;
        let amps: Vec<Complex<f64>> = buf
            .chunks_exact(16)
            .map(|c| {
                Complex::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        let s = StateVector::from_amplitudes(amps)?;
        if (s.norm_sqr() - expected_norm_sqr).abs() > 1e-12 {
            return Err(Error::NumericalHealth(format!(
                "shard record {offset}: norm checksum {} != stored {expected_norm_sqr}",
                s.norm_sqr()
            )));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> DatasetConfig {
        DatasetConfig {
            n_sites: 5,
            grid: GridSpec {
                h1: [0.0, 1.2],
                h2: [-1.0, 1.0],
                shape: [3, 4],
            },
            seed: 7,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(-1.6, 1.6, 5);
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], -1.6);
        assert_eq!(v[4], 1.6);
        assert_eq!(linspace(0.3, 9.0, 1), vec![0.3]);
    }

    #[test]
    fn default_grid_has_2500_points() {
        assert_eq!(GridSpec::default().points().len(), 2500);
    }

    #[test]
    fn seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|k| derive_seed(5, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn manifest_is_deterministic() {
        let a = generate_dataset(&small_config()).unwrap();
        let b = generate_dataset(&small_config()).unwrap();
        let ma = Manifest::new(&a, "abc", None).to_json().unwrap();
        let mb = Manifest::new(&b, "abc", None).to_json().unwrap();
        assert_eq!(ma, mb);
        assert_eq!(a.records.len(), 12);
    }

    #[test]
    fn shard_round_trip_and_checksum() {
        let ds = generate_dataset(&small_config()).unwrap();
        let dir = std::env::temp_dir().join(format!("swapattn-shard-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let shard = dir.join("states.bin");
        let mut w = ShardWriter::create(&shard, 5).unwrap();
        for r in &ds.records {
            w.append(r.state.as_ref().unwrap()).unwrap();
        }
        w.finish().unwrap();
        let manifest = Manifest::new(&ds, "d", Some("states.bin".into()));
        let mpath = dir.join("manifest.json");
        manifest.write(&mpath).unwrap();
        let loaded = Manifest::load(&mpath).unwrap();
        assert_eq!(loaded, manifest);
        let back = loaded.load_dataset(&mpath, true).unwrap();
        for (a, b) in back.records.iter().zip(&ds.records) {
            assert_eq!(a.state, b.state);
        }
        let mut reader = ShardReader::open(&shard, 5).unwrap();
        assert!(matches!(reader.read(2, 0.5), Err(Error::NumericalHealth(_))));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn regenerated_state_matches_cached() {
        let cfg = DatasetConfig {
            n_sites: 9,
            grid: GridSpec {
                h1: [0.3, 0.3],
                h2: [0.2, 0.2],
                shape: [1, 1],
            },
            ..DatasetConfig::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        let r = &ds.records[0];
        let again = regenerate_state(&cfg, r.h1, r.h2, r.seed).unwrap();
        assert_eq!(Some(again), r.state);
    }
}
