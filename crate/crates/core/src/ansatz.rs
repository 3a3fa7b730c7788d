//! Trainable feature-mapping circuit and exact gradients of pair-swap
//! observables through it.
//!
//! One layer on `n` qubits is four sublayers of `n` gates each:
//!
//! | sublayer | gates |
//! |----------|-------|
//! | A | RY on every qubit |
//! | B | CRX on ring edge `(i, i+1 mod n)`, control `i` |
//! | C | RY on every qubit |
//! | D | CRX on ring edge `(i, i+1 mod n)`, control `i+1 mod n` |
//!
//! so `l` layers carry `4·n·l` angles. Angle `k` belongs to
//! `(layer, sublayer, qubit) = (k / 4n, (k / n) % 4, k % n)`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cone, czero, Real};
use crate::statevec::{rx_derivative, rx_matrix, ry_derivative, ry_matrix, StateVector};

pub const SUBLAYERS: usize = 4;

/// Number of angles for `layers` layers on `n` qubits.
pub fn param_count(n: usize, layers: usize) -> usize {
    SUBLAYERS * n * layers
}

/// Position of a gate inside the layer structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub layer: usize,
    pub sublayer: usize,
    pub qubit: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Ry { qubit: usize },
    Crx { control: usize, target: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzParams<T: Real> {
    n_qubits: usize,
    layers: usize,
    theta: Vec<T>,
}

impl<T: Real> AnsatzParams<T> {
    pub fn new(n_qubits: usize, layers: usize, theta: Vec<T>) -> Result<Self> {
        if n_qubits < 2 || layers == 0 {
            return Err(Error::Size(format!(
                "ansatz needs n >= 2 and l >= 1, got n={n_qubits}, l={layers}"
            )));
        }
        let expected = param_count(n_qubits, layers);
        if theta.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: theta.len(),
            });
        }
        Ok(Self {
            n_qubits,
            layers,
            theta,
        })
    }

    pub fn zeros(n_qubits: usize, layers: usize) -> Result<Self> {
        Self::new(n_qubits, layers, vec![T::zero(); param_count(n_qubits, layers)])
    }

    /// Angles drawn uniformly from [−scale, scale].
    pub fn random(n_qubits: usize, layers: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..param_count(n_qubits, layers))
            .map(|_| T::lit(rng.random_range(-scale..=scale)))
            .collect();
        Self::new(n_qubits, layers, theta)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [T] {
        &mut self.theta
    }

    pub fn index_of(&self, slot: Slot) -> usize {
        (slot.layer * SUBLAYERS + slot.sublayer) * self.n_qubits + slot.qubit
    }

    pub fn slot_of(&self, index: usize) -> Slot {
        let n = self.n_qubits;
        Slot {
            layer: index / (SUBLAYERS * n),
            sublayer: (index / n) % SUBLAYERS,
            qubit: index % n,
        }
    }

    /// Gate driven by angle `index`.
    pub fn gate(&self, index: usize) -> Gate {
        let n = self.n_qubits;
        let Slot { sublayer, qubit, .. } = self.slot_of(index);
        let next = (qubit + 1) % n;
        match sublayer {
            0 | 2 => Gate::Ry { qubit },
            1 => Gate::Crx {
                control: qubit,
                target: next,
            },
            _ => Gate::Crx {
                control: next,
                target: qubit,
            },
        }
    }
}

fn check_register<T: Real>(state: &StateVector<T>, p: &AnsatzParams<T>) -> Result<()> {
    if state.n_qubits() != p.n_qubits {
        return Err(Error::Dimension {
            expected: p.n_qubits,
            actual: state.n_qubits(),
        });
    }
    Ok(())
}

fn apply_gate<T: Real>(state: &mut StateVector<T>, gate: Gate, theta: T) {
    match gate {
        Gate::Ry { qubit } => state.apply_mat2_masked(qubit, &ry_matrix(theta), 0, cone()),
        Gate::Crx { control, target } => {
            state.apply_mat2_masked(target, &rx_matrix(theta), 1 << control, cone())
        }
    }
}

fn apply_gate_derivative<T: Real>(state: &mut StateVector<T>, gate: Gate, theta: T) {
    match gate {
        Gate::Ry { qubit } => state.apply_mat2_masked(qubit, &ry_derivative(theta), 0, cone()),
        Gate::Crx { control, target } => {
            state.apply_mat2_masked(target, &rx_derivative(theta), 1 << control, czero())
        }
    }
}

/// Applies U(θ) in place.
pub fn apply_ansatz<T: Real>(state: &mut StateVector<T>, p: &AnsatzParams<T>) -> Result<()> {
    check_register(state, p)?;
    for (k, &theta) in p.theta.iter().enumerate() {
        apply_gate(state, p.gate(k), theta);
    }
    Ok(())
}

/// Number of unordered qubit pairs.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Row-major index of pair (i, j), i < j, among the `n(n−1)/2` pairs.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Pairs (i, j), i < j, in row-major order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// O|φ⟩ for O = Σ_{i<j} w_ij SWAP_ij, weights in [`pairs`] order.
pub fn apply_swap_observable<T: Real>(phi: &StateVector<T>, weights: &[T]) -> Result<Vec<Complex<T>>> {
    let n = phi.n_qubits();
    if weights.len() != pair_count(n) {
        return Err(Error::Dimension {
            expected: pair_count(n),
            actual: weights.len(),
        });
    }
    let amps = phi.amplitudes();
    let mut out = vec![czero::<T>(); amps.len()];
    for ((i, j), &w) in pairs(n).zip(weights) {
        if w == T::zero() {
            continue;
        }
        let (bi, bj) = (1usize << i, 1usize << j);
        for (b, o) in out.iter_mut().enumerate() {
            let src = if ((b >> i) ^ (b >> j)) & 1 == 1 { b ^ bi ^ bj } else { b };
            *o += amps[src].scale(w);
        }
    }
    Ok(out)
}

fn re_dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Value and θ-gradient of ⟨ψ(θ)|O|ψ(θ)⟩ with O = Σ_{i<j} w_ij SWAP_ij,
/// by one reverse sweep through the circuit.
pub fn gradient_expectations<T: Real>(
    input: &StateVector<T>,
    p: &AnsatzParams<T>,
    weights: &[T],
) -> Result<(T, Vec<T>)> {
    check_register(input, p)?;
    let mut phi = input.clone();
    apply_ansatz(&mut phi, p)?;
    let lambda_amps = apply_swap_observable(&phi, weights)?;
    let value = re_dot(phi.amplitudes(), &lambda_amps);

    let mut grad = vec![T::zero(); p.theta.len()];
    if weights.iter().all(|&w| w == T::zero()) {
        return Ok((value, grad));
    }
    let mut lambda = phi.clone();
    lambda.amplitudes_mut().copy_from_slice(&lambda_amps);
    let two = T::lit(2.0);
    let mut mu = phi.clone();
    for k in (0..p.theta.len()).rev() {
        let gate = p.gate(k);
        let theta = p.theta[k];
        apply_gate(&mut phi, gate, -theta);
        mu.amplitudes_mut().copy_from_slice(phi.amplitudes());
        apply_gate_derivative(&mut mu, gate, theta);
        grad[k] = two * re_dot(lambda.amplitudes(), mu.amplitudes());
        apply_gate(&mut lambda, gate, -theta);
    }
    Ok((value, grad))
}
