//! Cluster-Ising chain: Hamiltonian terms, ground states, order parameters,
//! phase labels, boundary detection and dataset generation.
//!
//! ```text
//! H = −J Σ_{i=0}^{N−3} Z_i X_{i+1} Z_{i+2} − h1 Σ_{i=0}^{N−1} X_i − h2 Σ_{i=0}^{N−2} X_i X_{i+1}
//! ```
//!
//! Open boundary conditions; sites are 0-based and map onto qubits directly.

mod boundaries;
mod dataset;
mod solver;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Axis, PauliString};
use crate::scalar::{czero, Real};
use crate::statevec::StateVector;

pub use boundaries::{second_derivative_boundaries, BoundaryOptions};
pub use dataset::{
    derive_seed, generate_dataset, linspace, regenerate_state, Dataset, DatasetConfig, GridSpec,
    GroundStateRecord, Manifest, ManifestRecord, ShardReader, ShardWriter, MANIFEST_SCHEMA,
};
pub use solver::{
    dense_ground_state, ground_state, lanczos_lowest, tridiagonal_eigen, GroundState,
    LanczosOptions, LanczosResult, Solver, DENSE_MAX_SITES,
};

/// Parameters of one cluster-Ising Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_sites: usize,
    pub coupling: f64,
    pub h1: f64,
    pub h2: f64,
}

impl HamiltonianSpec {
    /// Spec with the cluster coupling fixed to one.
    pub fn new(n_sites: usize, h1: f64, h2: f64) -> Result<Self> {
        let s = Self {
            n_sites,
            coupling: 1.0,
            h1,
            h2,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(3..=15).contains(&self.n_sites) || self.n_sites.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "chain length must be odd and in 3..=15, got {}",
                self.n_sites
            )));
        }
        if ![self.coupling, self.h1, self.h2].iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("non-finite Hamiltonian parameter".into()));
        }
        Ok(())
    }

    /// Weighted Pauli terms of the Hamiltonian, zero coefficients pruned.
    pub fn build_terms<T: Real>(&self) -> Result<PauliSum<T>> {
        self.validate()?;
        let n = self.n_sites;
        let mut sum = PauliSum::new(n);
        if self.coupling != 0.0 {
            for i in 0..n - 2 {
                sum.push(
                    T::lit(-self.coupling),
                    PauliString::new(vec![(i, Axis::Z), (i + 1, Axis::X), (i + 2, Axis::Z)])?,
                )?;
            }
        }
        if self.h1 != 0.0 {
            for i in 0..n {
                sum.push(T::lit(-self.h1), PauliString::single(i, Axis::X))?;
            }
        }
        if self.h2 != 0.0 {
            for i in 0..n - 1 {
                sum.push(
                    T::lit(-self.h2),
                    PauliString::new(vec![(i, Axis::X), (i + 1, Axis::X)])?,
                )?;
            }
        }
        Ok(sum)
    }
}

#[derive(Clone, Copy, Debug)]
struct CompiledTerm<T> {
    coeff: T,
    x_mask: usize,
    z_mask: usize,
    y_count: usize,
}

/// Real-weighted sum of Pauli strings acting on `n_qubits` qubits.
#[derive(Clone, Debug)]
pub struct PauliSum<T: Real> {
    n_qubits: usize,
    terms: Vec<(T, PauliString)>,
    compiled: Vec<CompiledTerm<T>>,
}

impl<T: Real> PauliSum<T> {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
            compiled: Vec::new(),
        }
    }

    pub fn push(&mut self, coeff: T, p: PauliString) -> Result<()> {
        p.check_range(self.n_qubits)?;
        self.compiled.push(CompiledTerm {
            coeff,
            x_mask: p.x_mask(),
            z_mask: p.z_mask(),
            y_count: p.y_count(),
        });
        self.terms.push((coeff, p));
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn terms(&self) -> &[(T, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when every term has real matrix elements, so H is real symmetric.
    pub fn is_real(&self) -> bool {
        self.compiled.iter().all(|t| t.y_count % 2 == 0)
    }

    /// out = H·v on raw complex amplitudes.
    pub fn apply(&self, v: &[Complex<T>], out: &mut [Complex<T>]) -> Result<()> {
        self.check_len(v.len())?;
        self.check_len(out.len())?;
        out.iter_mut().for_each(|o| *o = czero());
        for t in &self.compiled {
            let phase = match t.y_count % 4 {
                0 => Complex::new(t.coeff, T::zero()),
                1 => Complex::new(T::zero(), t.coeff),
                2 => Complex::new(-t.coeff, T::zero()),
                _ => Complex::new(T::zero(), -t.coeff),
            };
            for (b, a) in v.iter().enumerate() {
                let s = if (b & t.z_mask).count_ones() & 1 == 1 { -*a } else { *a };
                out[b ^ t.x_mask] += s * phase;
            }
        }
        Ok(())
    }

    /// out = H·v on real vectors. Requires [`PauliSum::is_real`].
    pub fn apply_real(&self, v: &[T], out: &mut [T]) -> Result<()> {
        if !self.is_real() {
            return Err(Error::Domain("operator has imaginary matrix elements".into()));
        }
        self.check_len(v.len())?;
        self.check_len(out.len())?;
        out.iter_mut().for_each(|o| *o = T::zero());
        for t in &self.compiled {
            let c = if t.y_count % 4 == 2 { -t.coeff } else { t.coeff };
            for (b, &a) in v.iter().enumerate() {
                let s = if (b & t.z_mask).count_ones() & 1 == 1 { -a } else { a };
                out[b ^ t.x_mask] += s * c;
            }
        }
        Ok(())
    }

    /// H|v⟩ as a fresh amplitude vector (not normalized).
    pub fn matvec(&self, v: &StateVector<T>) -> Result<Vec<Complex<T>>> {
        let mut out = vec![czero(); v.dim()];
        self.apply(v.amplitudes(), &mut out)?;
        Ok(out)
    }

    /// ⟨v|H|v⟩.
    pub fn expectation(&self, v: &StateVector<T>) -> Result<T> {
        let hv = self.matvec(v)?;
        Ok(v
            .amplitudes()
            .iter()
            .zip(&hv)
            .fold(czero::<T>(), |acc, (a, b)| acc + a.conj() * b)
            .re)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Three-way phase classification. The discriminant is the class index
/// used throughout training and in checkpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PhaseLabel {
    #[serde(rename = "AFM")]
    Afm = 0,
    #[serde(rename = "SPT")]
    Spt = 1,
    #[serde(rename = "PM")]
    Pm = 2,
}

impl PhaseLabel {
    pub const ALL: [PhaseLabel; 3] = [PhaseLabel::Afm, PhaseLabel::Spt, PhaseLabel::Pm];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhaseLabel::Afm => "AFM",
            PhaseLabel::Spt => "SPT",
            PhaseLabel::Pm => "PM",
        }
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AFM" => Ok(PhaseLabel::Afm),
            "SPT" => Ok(PhaseLabel::Spt),
            "PM" => Ok(PhaseLabel::Pm),
            other => Err(Error::Format(format!("unknown phase label {other:?}"))),
        }
    }
}

/// Thresholds of the labeling rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelThresholds {
    /// Minimum |⟨S⟩| for the SPT label.
    pub string_order: f64,
    /// AFM requires the mean nearest-neighbour ⟨XX⟩ at or below minus this value.
    pub nn_xx: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        Self {
            string_order: 0.5,
            nn_xx: 0.3,
        }
    }
}

impl LabelThresholds {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("string_order", self.string_order), ("nn_xx", self.nn_xx)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("threshold {name} = {v} outside (0, 1)")));
            }
        }
        Ok(())
    }
}

/// String order operator Z X X … X Z on an odd chain: Z on both ends, X on
/// every odd (0-based) site.
pub fn string_order_operator(n_sites: usize) -> Result<PauliString> {
    if n_sites < 3 || n_sites.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "string order needs an odd chain of at least 3 sites, got {n_sites}"
        )));
    }
    let mut f = vec![(0, Axis::Z), (n_sites - 1, Axis::Z)];
    f.extend((1..n_sites - 1).step_by(2).map(|i| (i, Axis::X)));
    PauliString::new(f)
}

/// ⟨S⟩ for the string order operator.
pub fn string_order<T: Real>(state: &StateVector<T>, n_sites: usize) -> Result<T> {
    if state.n_qubits() != n_sites {
        return Err(Error::Dimension {
            expected: n_sites,
            actual: state.n_qubits(),
        });
    }
    state.expect_pauli(&string_order_operator(n_sites)?)
}

/// Mean nearest-neighbour ⟨X_i X_{i+1}⟩.
pub fn nn_xx<T: Real>(state: &StateVector<T>, n_sites: usize) -> Result<T> {
    if state.n_qubits() != n_sites || n_sites < 2 {
        return Err(Error::Dimension {
            expected: n_sites,
            actual: state.n_qubits(),
        });
    }
    let mut acc = T::zero();
    for i in 0..n_sites - 1 {
        acc += state.expect_pauli(&PauliString::new(vec![(i, Axis::X), (i + 1, Axis::X)])?)?;
    }
    Ok(acc / T::from_count(n_sites - 1))
}

/// SPT when |⟨S⟩| clears its threshold, else AFM when neighbours are
/// anti-aligned along X, else PM.
pub fn label_point(string_order: f64, nn_xx: f64, t: &LabelThresholds) -> PhaseLabel {
    if string_order.abs() >= t.string_order {
        PhaseLabel::Spt
    } else if nn_xx <= -t.nn_xx {
        PhaseLabel::Afm
    } else {
        PhaseLabel::Pm
    }
}
