//! Swap-test attention matrices.
//!
//! Entry `q_ij` is `2·P_ij(0) − 1`, where `P_ij(0)` is the probability that
//! the ancilla of a swap test on qubits `i` and `j` reads 0. That equals the
//! overlap `⟨Φ|SWAP_ij|Φ⟩`, which the analytic mode evaluates directly; the
//! circuit mode runs the ancilla protocol on an enlarged register.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ansatz::{pair_count, pairs};
use crate::error::{Error, Result};
use crate::hamiltonian::PhaseLabel;
use crate::report::{sig12, write_row};
use crate::scalar::{czero, Real};
use crate::statevec::{StateVector, MAX_QUBITS};

/// Symmetric `n×n` matrix with unit diagonal and entries in [−1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionMatrix<T: Real> {
    n: usize,
    q: Vec<T>,
}

impl<T: Real> AttentionMatrix<T> {
    /// Assembles a matrix from its upper triangle in [`pairs`] order.
    pub fn from_upper(n: usize, upper: &[T]) -> Result<Self> {
        if upper.len() != pair_count(n) {
            return Err(Error::Dimension {
                expected: pair_count(n),
                actual: upper.len(),
            });
        }
        let mut q = vec![T::zero(); n * n];
        for i in 0..n {
            q[i * n + i] = T::one();
        }
        for ((i, j), &v) in pairs(n).zip(upper) {
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
        let m = Self { n, q };
        m.validate()?;
        Ok(m)
    }

    /// Wraps a full row-major matrix after checking symmetry, the unit
    /// diagonal, and the entry range.
    pub fn from_full(n: usize, q: Vec<T>) -> Result<Self> {
        if q.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: q.len(),
            });
        }
        let m = Self { n, q };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let bound = T::one() + T::lit(1e-9);
        for i in 0..n {
            if self.q[i * n + i] != T::one() {
                return Err(Error::NumericalHealth(format!("attention diagonal {i} is not 1")));
            }
            for j in 0..n {
                let v = self.q[i * n + j];
                if v != self.q[j * n + i] {
                    return Err(Error::NumericalHealth(format!("attention not symmetric at ({i}, {j})")));
                }
                if !(v.abs() <= bound) {
                    return Err(Error::NumericalHealth(format!("attention entry ({i}, {j}) = {v} outside [-1, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.q[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    /// Entries above the diagonal, row-major: `[q01, q02, …, q12, …]`.
    pub fn upper_triangle(&self) -> Vec<T> {
        pairs(self.n).map(|(i, j)| self.get(i, j)).collect()
    }

    /// Heatmap CSV: a header of 1-based qubit indices, then one row per qubit.
    pub fn write_heatmap_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["qubit".to_string()];
        header.extend((1..=self.n).map(|k| k.to_string()));
        write_row(&mut w, &header)?;
        for i in 0..self.n {
            let mut row = vec![(i + 1).to_string()];
            row.extend(self.row(i).iter().map(|v| sig12(v.as_f64())));
            write_row(&mut w, &row)?;
        }
        Ok(())
    }

    /// JSON heatmap embedding the grid point and its label.
    pub fn heatmap_json(&self, h1: f64, h2: f64, label: Option<PhaseLabel>) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.as_f64()).collect())
            .collect();
        serde_json::json!({
            "h1": h1,
            "h2": h2,
            "label": label.map(|l| l.as_str()),
            "n": self.n,
            "q": rows,
        })
    }
}

/// Upper triangle of `m`; the order is part of the checkpoint contract.
pub fn upper_triangle<T: Real>(m: &AttentionMatrix<T>) -> Vec<T> {
    m.upper_triangle()
}

/// ⟨Φ|SWAP_ij|Φ⟩ evaluated by index permutation, with its imaginary residue.
fn swap_overlap<T: Real>(state: &StateVector<T>, i: usize, j: usize) -> (T, T) {
    let a = state.amplitudes();
    let (bi, bj) = (1usize << i, 1usize << j);
    let mut acc = czero::<T>();
    for (b, x) in a.iter().enumerate() {
        let src = if ((b >> i) ^ (b >> j)) & 1 == 1 { b ^ bi ^ bj } else { b };
        acc += x.conj() * a[src];
    }
    (acc.re, acc.im)
}

/// Attention matrix from exact swap overlaps, pairs in lexicographic order.
pub fn attention_analytic<T: Real>(state: &StateVector<T>) -> Result<AttentionMatrix<T>> {
    let n = state.n_qubits();
    if n < 2 {
        return Err(Error::Size("attention needs at least 2 qubits".into()));
    }
    let mut upper = Vec::with_capacity(pair_count(n));
    for (i, j) in pairs(n) {
        let (re, im) = swap_overlap(state, i, j);
        if im.abs().as_f64() > T::IMAG_TOL {
            return Err(Error::NumericalHealth(format!(
                "swap overlap ({i}, {j}) has imaginary part {im}"
            )));
        }
        upper.push(re);
    }
    AttentionMatrix::from_upper(n, &upper)
}

/// Attention matrix from the ancilla swap-test circuit.
///
/// For each pair the state is embedded next to an ancilla (the most
/// significant qubit) prepared in |0⟩, and H · CSWAP · H is applied to the
/// ancilla. With `shots`, the exact ancilla-zero probability is replaced by
/// the mean of a seeded binomial draw.
pub fn attention_circuit<T: Real>(
    state: &StateVector<T>,
    shots: Option<u64>,
    seed: u64,
) -> Result<AttentionMatrix<T>> {
    let n = state.n_qubits();
    if n < 2 {
        return Err(Error::Size("attention needs at least 2 qubits".into()));
    }
    if n + 1 > MAX_QUBITS {
        return Err(Error::Size(format!(
            "swap-test register of {} qubits exceeds {MAX_QUBITS}",
            n + 1
        )));
    }
    if shots == Some(0) {
        return Err(Error::Config("shots must be positive".into()));
    }
    let ancilla = n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut embedded = vec![czero::<T>(); 2 * state.dim()];
    embedded[..state.dim()].copy_from_slice(state.amplitudes());
    let base = StateVector::from_amplitudes(embedded)?;

    let mut upper = Vec::with_capacity(pair_count(n));
    for (i, j) in pairs(n) {
        let mut reg = base.clone();
        reg.apply_h(ancilla)?;
        reg.apply_cswap(ancilla, i, j)?;
        reg.apply_h(ancilla)?;
        let mut p0 = reg.prob_qubit_zero(ancilla)?;
        if let Some(shots) = shots {
            let dist = Binomial::new(shots, p0.as_f64().clamp(0.0, 1.0))
                .map_err(|e| Error::Domain(e.to_string()))?;
            let zeros = dist.sample(&mut rng);
            p0 = T::lit(zeros as f64 / shots as f64);
        }
        upper.push(T::lit(2.0) * p0 - T::one());
    }
    AttentionMatrix::from_upper(n, &upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    #[test]
    fn product_state_all_ones() {
        let s = StateVector::<f64>::zero_state(4).unwrap();
        let m = attention_analytic(&s).unwrap();
        assert!(m.upper_triangle().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let c = attention_circuit(&s, None, 0).unwrap();
        assert!(c.upper_triangle().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn singlet_is_antisymmetric() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = StateVector::from_amplitudes(vec![
            Complex::new(0.0, 0.0),
            Complex::new(h, 0.0),
            Complex::new(-h, 0.0),
            Complex::new(0.0, 0.0),
        ])
        .unwrap();
        assert!((attention_analytic(&s).unwrap().get(0, 1) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_after_swap() {
        let s = StateVector::<f64>::basis_state(2, 0b10).unwrap();
        assert_eq!(attention_analytic(&s).unwrap().get(0, 1), 0.0);
    }

    #[test]
    fn upper_triangle_order() {
        let m = AttentionMatrix::from_upper(3, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(upper_triangle(&m), vec![0.1, 0.2, 0.3]);
        assert_eq!(m.get(2, 1), 0.3);
        assert_eq!(m.get(1, 1), 1.0);
        let ones = AttentionMatrix::from_upper(9, &[1.0; 36]).unwrap();
        assert_eq!(upper_triangle(&ones), vec![1.0; 36]);
    }

    #[test]
    fn invalid_matrices_rejected() {
        assert!(AttentionMatrix::from_upper(3, &[0.1, 1.5, 0.3]).is_err());
        assert!(AttentionMatrix::from_full(2, vec![1.0, 0.2, 0.3, 1.0]).is_err());
        assert!(AttentionMatrix::from_full(2, vec![0.9, 0.2, 0.2, 1.0]).is_err());
    }

    #[test]
    fn circuit_register_limit() {
        let s = StateVector::<f64>::zero_state(16).unwrap();
        assert!(matches!(attention_circuit(&s, None, 0), Err(Error::Size(_))));
    }

    #[test]
    fn heatmap_csv_layout() {
        let m = AttentionMatrix::from_upper(3, &[0.5, 0.25, -0.125]).unwrap();
        let mut buf = Vec::new();
        m.write_heatmap_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "qubit,1,2,3");
        assert!(lines[1].starts_with("1,1.00000000000e0,5.00000000000e-1"));
        let j = m.heatmap_json(0.39, -1.0, Some(PhaseLabel::Afm));
        assert_eq!(j["label"], "AFM");
        assert_eq!(j["q"][2][1], -0.125);
    }
}
