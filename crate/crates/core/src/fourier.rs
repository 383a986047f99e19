//! Quantum Fourier transform over `Z_n` for arbitrary `n`, Fourier basis states
//! and the Fourier-basis marginal of a register.

use crate::error::{PhaseLabError, Result};
use crate::linalg::{apply_to_registers, root_of_unity, RegisterLayout, StateVector, UnitaryMatrix};

/// Label used for standalone Fourier states.
pub const PLAIN_LABEL: &str = "v";

/// Index `k` of the Fourier basis state `|k̂⟩` of `Z_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FourierBasisIndex {
    n: usize,
    k: usize,
}

impl FourierBasisIndex {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(PhaseLabError::Domain("modulus must be positive".into()));
        }
        if k >= n {
            return Err(PhaseLabError::Index { index: k, dim: n });
        }
        Ok(Self { n, k })
    }

    pub fn modulus(self) -> usize {
        self.n
    }

    pub fn index(self) -> usize {
        self.k
    }

    /// `k + shift mod n`, the effect of one phase-gradient multiplication.
    pub fn shifted(self, shift: i64) -> Self {
        let k = (self.k as i64 + shift).rem_euclid(self.n as i64) as usize;
        Self { n: self.n, k }
    }

    /// Index of the complex-conjugate state, `-k mod n`.
    pub fn negated(self) -> Self {
        self.shifted(-2 * self.k as i64)
    }
}

/// `QFT_n` with entry `(y', y) = ω_n^{y y'} / √n`; column `y` is `|ŷ⟩`.
pub fn qft_matrix(n: usize) -> Result<UnitaryMatrix> {
    if n == 0 {
        return Err(PhaseLabError::Domain("QFT dimension must be positive".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut entries = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            entries.push(root_of_unity(((r * c) % n) as i64, n) * scale);
        }
    }
    Ok(UnitaryMatrix::from_raw(n, entries))
}

/// `QFT_n†`.
pub fn inverse_qft_matrix(n: usize) -> Result<UnitaryMatrix> {
    Ok(qft_matrix(n)?.adjoint())
}

fn fourier_amplitudes(n: usize, y: usize, sign: i64) -> Result<Vec<crate::linalg::Complex>> {
    if n == 0 {
        return Err(PhaseLabError::Domain("modulus must be positive".into()));
    }
    if y >= n {
        return Err(PhaseLabError::Index { index: y, dim: n });
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok((0..n).map(|t| root_of_unity(sign * ((y * t) % n) as i64, n) * scale).collect())
}

/// `|ŷ⟩ = n^{-1/2} Σ_{y'} ω_n^{y y'} |y'⟩` on a single register labeled `v`.
pub fn fourier_state(n: usize, y: usize) -> Result<StateVector> {
    fourier_state_on(PLAIN_LABEL, n, y)
}

pub fn fourier_state_on(label: &str, n: usize, y: usize) -> Result<StateVector> {
    let amps = fourier_amplitudes(n, y, 1)?;
    StateVector::new(RegisterLayout::single(label, n)?, amps)
}

/// `|−ŷ⟩`, the entrywise conjugate of `|ŷ⟩`.
pub fn conjugate_fourier_state(n: usize, y: usize) -> Result<StateVector> {
    conjugate_fourier_state_on(PLAIN_LABEL, n, y)
}

pub fn conjugate_fourier_state_on(label: &str, n: usize, y: usize) -> Result<StateVector> {
    let amps = fourier_amplitudes(n, y, -1)?;
    StateVector::new(RegisterLayout::single(label, n)?, amps)
}

/// Diagonal `|y⟩ ↦ ω_n^y |y⟩`; shifts every Fourier index up by one.
pub fn phase_gradient(n: usize) -> Result<UnitaryMatrix> {
    if n == 0 {
        return Err(PhaseLabError::Domain("modulus must be positive".into()));
    }
    let diag: Vec<_> = (0..n).map(|y| root_of_unity(y as i64, n)).collect();
    UnitaryMatrix::diagonal(&diag)
}

/// Probability of each Fourier index on `register`: the distribution obtained by
/// applying `QFT†` to that register and measuring it. The input is not touched.
pub fn fourier_weights(state: &StateVector, register: &str) -> Result<Vec<f64>> {
    let n = state.layout().dim_of(register)?;
    let rotated = apply_to_registers(state, &inverse_qft_matrix(n)?, &[register])?;
    rotated.marginal(register)
}
