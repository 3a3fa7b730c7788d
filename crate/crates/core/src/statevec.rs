//! Dense statevector simulator.
//!
//! Qubit `k` is bit `k` of the basis index: site 0 is the least-significant
//! bit. Gate kernels update amplitude pairs in place; no gate matrix over the
//! full register is ever built.

use std::io::Write;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::scalar::{cone, czero, Real};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 16;

/// 2x2 complex matrix in row-major order.
pub type Mat2<T> = [[Complex<T>; 2]; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    n_qubits: usize,
    amps: Vec<Complex<T>>,
}

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Size(format!(
            "{n} qubits requested; supported range is 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

impl<T: Real> StateVector<T> {
    /// The all-zero computational basis state |0…0⟩.
    pub fn zero_state(n: usize) -> Result<Self> {
        Self::basis_state(n, 0)
    }

    pub fn basis_state(n: usize, index: usize) -> Result<Self> {
        check_size(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(Error::Index(format!("basis index {index} >= {dim}")));
        }
        let mut amps = vec![czero(); dim];
        amps[index] = cone();
        Ok(Self { n_qubits: n, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the norm is
    /// checked against [`Real::NORM_DRIFT_TOL`].
    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::Size(format!("{len} amplitudes is not a power of two")));
        }
        let n = len.trailing_zeros() as usize;
        check_size(n)?;
        let s = Self { n_qubits: n, amps };
        s.check_norm()?;
        Ok(s)
    }

    /// Normalizes the given amplitudes explicitly, then wraps them.
    pub fn from_unnormalized(mut amps: Vec<Complex<T>>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::NumericalHealth("cannot normalize a zero or non-finite vector".into()));
        }
        let inv = T::one() / norm;
        amps.iter_mut().for_each(|a| *a = a.scale(inv));
        Self::from_amplitudes(amps)
    }

    /// Haar-like random state from i.i.d. complex Gaussian amplitudes.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        check_size(n)?;
        let amps = (0..1usize << n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(T::lit(re), T::lit(im))
            })
            .collect();
        Self::from_unnormalized(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    /// Mutable access to raw amplitudes. Callers are responsible for keeping
    /// the state normalized; see [`StateVector::check_norm`].
    pub fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex<T>> {
        self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Fails with a numerical-health error if the norm drifted from one.
    pub fn check_norm(&self) -> Result<()> {
        let norm = self.norm_sqr().sqrt().as_f64();
        if !norm.is_finite() || (norm - 1.0).abs() > T::NORM_DRIFT_TOL {
            return Err(Error::NumericalHealth(format!("state norm {norm} drifted from 1")));
        }
        Ok(())
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn apply_global_phase(&mut self, phi: T) {
        let p = Complex::from_polar(T::one(), phi);
        self.amps.iter_mut().for_each(|a| *a *= p);
    }

    pub fn cast<U: Real>(&self) -> StateVector<U> {
        StateVector {
            n_qubits: self.n_qubits,
            amps: self
                .amps
                .iter()
                .map(|a| Complex::new(U::lit(a.re.as_f64()), U::lit(a.im.as_f64())))
                .collect(),
        }
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::Index(format!(
                "qubit {q} out of range for {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }

    fn check_distinct(&self, qs: &[usize]) -> Result<()> {
        for (k, &q) in qs.iter().enumerate() {
            self.check_qubit(q)?;
            if qs[..k].contains(&q) {
                return Err(Error::Index(format!("qubit {q} used twice in one gate")));
            }
        }
        Ok(())
    }

    /// Applies a 2x2 matrix to `target` on the subspace where every bit of
    /// `control_mask` is set. Amplitudes outside that subspace are multiplied
    /// by `outside` (one for an ordinary controlled gate, zero for the
    /// derivative of one).
    pub(crate) fn apply_mat2_masked(
        &mut self,
        target: usize,
        m: &Mat2<T>,
        control_mask: usize,
        outside: Complex<T>,
    ) {
        let stride = 1usize << target;
        let dim = self.amps.len();
        let scale_outside = outside != cone::<T>();
        let mut base = 0;
        while base < dim {
            for i0 in base..base + stride {
                let i1 = i0 | stride;
                if i0 & control_mask == control_mask {
                    let a0 = self.amps[i0];
                    let a1 = self.amps[i1];
                    self.amps[i0] = m[0][0] * a0 + m[0][1] * a1;
                    self.amps[i1] = m[1][0] * a0 + m[1][1] * a1;
                } else if scale_outside {
                    self.amps[i0] *= outside;
                    self.amps[i1] *= outside;
                }
            }
            base += 2 * stride;
        }
    }

    /// Arbitrary single-qubit matrix.
    pub fn apply_mat2(&mut self, qubit: usize, m: &Mat2<T>) -> Result<()> {
        self.check_qubit(qubit)?;
        self.apply_mat2_masked(qubit, m, 0, cone());
        Ok(())
    }

    /// Single-qubit matrix on `target` conditioned on `control` = |1⟩.
    pub fn apply_controlled_mat2(&mut self, control: usize, target: usize, m: &Mat2<T>) -> Result<()> {
        self.check_distinct(&[control, target])?;
        self.apply_mat2_masked(target, m, 1 << control, cone());
        Ok(())
    }

    /// RY(θ) = exp(−iθY/2).
    pub fn apply_ry(&mut self, qubit: usize, theta: T) -> Result<()> {
        self.apply_mat2(qubit, &ry_matrix(theta))
    }

    /// RX(θ) = exp(−iθX/2).
    pub fn apply_rx(&mut self, qubit: usize, theta: T) -> Result<()> {
        self.apply_mat2(qubit, &rx_matrix(theta))
    }

    /// Controlled RX(θ) on `target`, active when `control` is |1⟩.
    pub fn apply_crx(&mut self, control: usize, target: usize, theta: T) -> Result<()> {
        self.apply_controlled_mat2(control, target, &rx_matrix(theta))
    }

    pub fn apply_h(&mut self, qubit: usize) -> Result<()> {
        let r = Complex::new(T::FRAC_1_SQRT_2(), T::zero());
        self.apply_mat2(qubit, &[[r, r], [r, -r]])
    }

    /// Exchanges bits `i` and `j` of every basis index.
    pub fn swap_qubits(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_distinct(&[i, j])?;
        self.swap_masked(i, j, 0);
        Ok(())
    }

    /// Fredkin gate: exchanges `a` and `b` where `control` is |1⟩.
    pub fn apply_cswap(&mut self, control: usize, a: usize, b: usize) -> Result<()> {
        self.check_distinct(&[control, a, b])?;
        self.swap_masked(a, b, 1 << control);
        Ok(())
    }

    fn swap_masked(&mut self, i: usize, j: usize, control_mask: usize) {
        let (bi, bj) = (1usize << i, 1usize << j);
        // Visit each index with bit i set and bit j clear exactly once.
        for idx in 0..self.amps.len() {
            if idx & bi != 0 && idx & bj == 0 && idx & control_mask == control_mask {
                self.amps.swap(idx, idx ^ bi ^ bj);
            }
        }
    }

    /// Applies a Pauli string in place.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        p.check_range(self.n_qubits)?;
        let (x, z) = (p.x_mask(), p.z_mask());
        let phase = i_pow::<T>(p.y_count());
        let src = std::mem::take(&mut self.amps);
        let mut out = vec![czero(); src.len()];
        for (b, a) in src.iter().enumerate() {
            let v = if (b & z).count_ones() % 2 == 1 { -*a } else { *a };
            out[b ^ x] = v * phase;
        }
        self.amps = out;
        Ok(())
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex<T>> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                actual: other.n_qubits,
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .fold(czero(), |acc, (a, b)| acc + a.conj() * b))
    }

    /// ⟨self|P|self⟩ for a Pauli string, clamped to [−1, 1].
    pub fn expect_pauli(&self, p: &PauliString) -> Result<T> {
        p.check_range(self.n_qubits)?;
        let (x, z) = (p.x_mask(), p.z_mask());
        // Σ_b conj(a[b ^ x]) · sign(b) · a[b], times i^y.
        let mut acc = czero::<T>();
        for (b, a) in self.amps.iter().enumerate() {
            let term = self.amps[b ^ x].conj() * a;
            if (b & z).count_ones() % 2 == 1 {
                acc -= term;
            } else {
                acc += term;
            }
        }
        let value = acc * i_pow::<T>(p.y_count());
        if value.im.abs().as_f64() > T::IMAG_TOL {
            return Err(Error::NumericalHealth(format!(
                "Pauli expectation has imaginary part {}",
                value.im
            )));
        }
        Ok(value.re.max(-T::one()).min(T::one()))
    }

    /// Probability of measuring `qubit` in |0⟩.
    pub fn prob_qubit_zero(&self, qubit: usize) -> Result<T> {
        self.check_qubit(qubit)?;
        let bit = 1usize << qubit;
        let p: T = self
            .amps
            .iter()
            .enumerate()
            .filter(|(b, _)| b & bit == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok(p.max(T::zero()).min(T::one()))
    }

    /// Debug dump: one `index,real,imag` row per amplitude, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,real,imag")?;
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(w, "{i},{:.16e},{:.16e}", a.re.as_f64(), a.im.as_f64())?;
        }
        Ok(())
    }
}

/// i^k.
fn i_pow<T: Real>(k: usize) -> Complex<T> {
    match k % 4 {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

pub fn ry_matrix<T: Real>(theta: T) -> Mat2<T> {
    let half = theta / T::lit(2.0);
    let (s, c) = half.sin_cos();
    let r = |x: T| Complex::new(x, T::zero());
    [[r(c), r(-s)], [r(s), r(c)]]
}

pub fn rx_matrix<T: Real>(theta: T) -> Mat2<T> {
    let half = theta / T::lit(2.0);
    let (s, c) = half.sin_cos();
    [
        [Complex::new(c, T::zero()), Complex::new(T::zero(), -s)],
        [Complex::new(T::zero(), -s), Complex::new(c, T::zero())],
    ]
}

/// dRY/dθ.
pub(crate) fn ry_derivative<T: Real>(theta: T) -> Mat2<T> {
    let half = theta / T::lit(2.0);
    let (s, c) = half.sin_cos();
    let h = T::lit(0.5);
    let r = |x: T| Complex::new(x * h, T::zero());
    [[r(-s), r(-c)], [r(c), r(-s)]]
}

/// dRX/dθ.
pub(crate) fn rx_derivative<T: Real>(theta: T) -> Mat2<T> {
    let half = theta / T::lit(2.0);
    let (s, c) = half.sin_cos();
    let h = T::lit(0.5);
    [
        [Complex::new(-s * h, T::zero()), Complex::new(T::zero(), -c * h)],
        [Complex::new(T::zero(), -c * h), Complex::new(-s * h, T::zero())],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Axis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn close(a: &StateVector<f64>, b: &[C], tol: f64) -> bool {
        a.amplitudes().iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn zero_state_examples() {
        let s = StateVector::<f64>::zero_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0)]);
        let s = StateVector::<f64>::zero_state(2).unwrap();
        assert_eq!(s.amplitudes().len(), 4);
        assert_eq!(s.amplitudes()[0], c(1.0, 0.0));
        assert!(matches!(StateVector::<f64>::zero_state(17), Err(Error::Size(_))));
        assert!(matches!(StateVector::<f64>::zero_state(0), Err(Error::Size(_))));
    }

    #[test]
    fn ry_examples() {
        let mut s = StateVector::<f64>::zero_state(1).unwrap();
        s.apply_ry(0, PI).unwrap();
        assert!(close(&s, &[c(0.0, 0.0), c(1.0, 0.0)], 1e-15));

        let mut s = StateVector::<f64>::zero_state(1).unwrap();
        s.apply_ry(0, PI / 2.0).unwrap();
        assert!(close(&s, &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = StateVector::<f64>::random(3, &mut rng).unwrap();
        let mut s = r.clone();
        s.apply_ry(1, 0.0).unwrap();
        assert_eq!(s, r);
        assert!(s.apply_ry(3, 0.1).is_err());
    }

    #[test]
    fn crx_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // Control 0 in |0⟩: qubit 0 clear, qubit 1 arbitrary.
        let mut s = StateVector::<f64>::from_unnormalized(vec![c(0.6, 0.0), c(0.0, 0.0), c(0.0, 0.8), c(0.0, 0.0)]).unwrap();
        let before = s.clone();
        s.apply_crx(0, 1, 1.234).unwrap();
        assert!(close(&s, before.amplitudes(), 1e-15));

        let r = StateVector::<f64>::random(3, &mut rng).unwrap();
        let mut s = r.clone();
        s.apply_crx(2, 0, 0.0).unwrap();
        assert!(close(&s, r.amplitudes(), 1e-15));

        // |11⟩ (index 3) → −i|q0=1, q1=0⟩, which is basis index 1.
        let mut s = StateVector::<f64>::basis_state(2, 3).unwrap();
        s.apply_crx(0, 1, PI).unwrap();
        assert!(close(&s, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0)], 1e-15));

        assert!(s.apply_crx(1, 1, 0.3).is_err());
        assert!(s.apply_crx(0, 2, 0.3).is_err());
    }

    #[test]
    fn hadamard_examples() {
        let mut s = StateVector::<f64>::zero_state(1).unwrap();
        s.apply_h(0).unwrap();
        assert!(close(&s, &[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)], 1e-15));
        let mut s = StateVector::<f64>::basis_state(1, 1).unwrap();
        s.apply_h(0).unwrap();
        assert!(close(&s, &[c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)], 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = StateVector::<f64>::random(4, &mut rng).unwrap();
        let mut s = r.clone();
        s.apply_h(2).unwrap();
        s.apply_h(2).unwrap();
        assert!(close(&s, r.amplitudes(), 1e-12));
        assert!(s.apply_h(4).is_err());
    }

    #[test]
    fn cswap_examples() {
        // Control qubit 2 in |0⟩, a=0, b=1, state |01⟩ on (q1,q0): unchanged.
        let mut s = StateVector::<f64>::basis_state(3, 0b001).unwrap();
        s.apply_cswap(2, 0, 1).unwrap();
        assert_eq!(s.amplitudes()[0b001], c(1.0, 0.0));
        // Control set: |1⟩|01⟩ → |1⟩|10⟩.
        let mut s = StateVector::<f64>::basis_state(3, 0b101).unwrap();
        s.apply_cswap(2, 0, 1).unwrap();
        assert_eq!(s.amplitudes()[0b110], c(1.0, 0.0));
        assert!(matches!(s.apply_cswap(2, 1, 1), Err(Error::Index(_))));
        assert!(s.apply_cswap(3, 0, 1).is_err());
    }

    #[test]
    fn swap_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = StateVector::<f64>::random(4, &mut rng).unwrap();
        let mut s = r.clone();
        s.swap_qubits(0, 3).unwrap();
        s.swap_qubits(0, 3).unwrap();
        assert_eq!(s, r);

        let bell = StateVector::<f64>::from_unnormalized(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let mut s = bell.clone();
        s.swap_qubits(0, 1).unwrap();
        assert_eq!(s, bell);

        let mut s = StateVector::<f64>::basis_state(2, 0b01).unwrap();
        s.swap_qubits(0, 1).unwrap();
        assert_eq!(s.amplitudes()[0b10], c(1.0, 0.0));
        assert!(s.swap_qubits(1, 1).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = StateVector::<f64>::random(3, &mut rng).unwrap();
        let b = StateVector::<f64>::random(3, &mut rng).unwrap();
        assert!((a.inner_product(&a).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
        let z = StateVector::<f64>::basis_state(1, 0).unwrap();
        let o = StateVector::<f64>::basis_state(1, 1).unwrap();
        assert_eq!(z.inner_product(&o).unwrap(), c(0.0, 0.0));
        let ab = a.inner_product(&b).unwrap();
        let ba = b.inner_product(&a).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-15);
        assert!(matches!(a.inner_product(&z), Err(Error::Dimension { .. })));
    }

    #[test]
    fn expect_pauli_examples() {
        let zero = StateVector::<f64>::zero_state(1).unwrap();
        assert_eq!(zero.expect_pauli(&PauliString::single(0, Axis::Z)).unwrap(), 1.0);
        assert_eq!(zero.expect_pauli(&PauliString::single(0, Axis::X)).unwrap(), 0.0);
        let mut plus = zero.clone();
        plus.apply_h(0).unwrap();
        assert!((plus.expect_pauli(&PauliString::single(0, Axis::X)).unwrap() - 1.0).abs() < 1e-15);
        assert!(zero.expect_pauli(&PauliString::single(1, Axis::X)).is_err());
        // ⟨+i|Y|+i⟩ = 1 with |+i⟩ = RX(−π/2)|0⟩.
        let mut yi = zero.clone();
        yi.apply_rx(0, -PI / 2.0).unwrap();
        assert!((yi.expect_pauli(&PauliString::single(0, Axis::Y)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn prob_zero_examples() {
        let s = StateVector::<f64>::zero_state(3).unwrap();
        for q in 0..3 {
            assert_eq!(s.prob_qubit_zero(q).unwrap(), 1.0);
        }
        let mut h = StateVector::<f64>::zero_state(1).unwrap();
        h.apply_h(0).unwrap();
        assert!((h.prob_qubit_zero(0).unwrap() - 0.5).abs() < 1e-15);
        assert!(h.prob_qubit_zero(1).is_err());
    }

    #[test]
    fn norm_drift_detected() {
        let bad = vec![c(1.0, 0.0), c(0.1, 0.0)];
        assert!(matches!(StateVector::<f64>::from_amplitudes(bad), Err(Error::NumericalHealth(_))));
        assert!(StateVector::<f64>::from_amplitudes(vec![c(1.0, 0.0); 3]).is_err());
    }

    #[test]
    fn csv_dump_has_17_digits() {
        let mut s = StateVector::<f64>::zero_state(1).unwrap();
        s.apply_h(0).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,real,imag"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "0");
        assert_eq!(row[1].parse::<f64>().unwrap(), FRAC_1_SQRT_2);
        assert_eq!(row[1].split('e').next().unwrap().replace('.', "").len(), 17);
    }

    #[test]
    fn f32_kernels_work() {
        let mut s = StateVector::<f32>::zero_state(2).unwrap();
        s.apply_h(0).unwrap();
        s.apply_crx(0, 1, std::f32::consts::PI).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-6);
        assert!((s.prob_qubit_zero(1).unwrap() - 0.5).abs() < 1e-6);
    }
}
