//! Pauli strings over a qubit register.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Tensor product of single-site Pauli operators, identity elsewhere.
///
/// Factors are kept sorted by site with no repeated sites. The string is
/// stored alongside its bit masks: `x_mask` marks sites whose operator flips
/// the basis bit (X and Y), `z_mask` marks sites contributing a sign (Z and
/// Y). With `y_count` Y factors, `P = i^y_count · X^x_mask · Z^z_mask`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    factors: Vec<(usize, Axis)>,
}

impl PauliString {
    /// Builds a string from `(site, axis)` factors in any order.
    pub fn new(mut factors: Vec<(usize, Axis)>) -> Result<Self> {
        factors.sort_by_key(|&(site, _)| site);
        for w in factors.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Index(format!("repeated site {} in Pauli string", w[0].0)));
            }
        }
        if let Some(&(site, _)) = factors.last() {
            if site >= 64 {
                return Err(Error::Index(format!("site {site} exceeds mask width")));
            }
        }
        Ok(Self { factors })
    }

    pub fn identity() -> Self {
        Self { factors: Vec::new() }
    }

    pub fn single(site: usize, axis: Axis) -> Self {
        Self {
            factors: vec![(site, axis)],
        }
    }

    pub fn factors(&self) -> &[(usize, Axis)] {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    /// One past the largest site touched, or 0 for the identity.
    pub fn support_end(&self) -> usize {
        self.factors.last().map_or(0, |&(s, _)| s + 1)
    }

    pub fn x_mask(&self) -> usize {
        self.factors
            .iter()
            .filter(|(_, a)| matches!(a, Axis::X | Axis::Y))
            .fold(0, |m, &(s, _)| m | (1 << s))
    }

    pub fn z_mask(&self) -> usize {
        self.factors
            .iter()
            .filter(|(_, a)| matches!(a, Axis::Z | Axis::Y))
            .fold(0, |m, &(s, _)| m | (1 << s))
    }

    pub fn y_count(&self) -> usize {
        self.factors.iter().filter(|(_, a)| *a == Axis::Y).count()
    }

    /// True when the operator has only real matrix elements (even number of Y).
    pub fn is_real(&self) -> bool {
        self.y_count().is_multiple_of(2)
    }

    pub(crate) fn check_range(&self, n_qubits: usize) -> Result<()> {
        if self.support_end() > n_qubits {
            return Err(Error::Index(format!(
                "Pauli string touches site {} on a {n_qubits}-qubit register",
                self.support_end() - 1
            )));
        }
        Ok(())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "I");
        }
        for (k, (site, axis)) in self.factors.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{axis:?}{site}")?;
        }
        Ok(())
    }
}
