//! The phase-distinguishing oracle family `{U_y}`, its controlled and coherent
//! (counter-controlled) versions, and single-phase unitaries for continuous θ.

use crate::error::{PhaseLabError, Result};
use crate::linalg::{
    complete_orthonormal_basis, norm_sq, root_of_unity, tol, Complex, RegisterLayout, UnitaryMatrix, ONE, ZERO,
};

/// Register labels shared by the simulators and builders.
pub mod labels {
    /// Output register, measured in the computational basis.
    pub const OUTPUT: &str = "O";
    /// Control wire of the oracle.
    pub const CONTROL: &str = "B";
    /// Work register the oracle's unitary acts on.
    pub const WORK: &str = "W";
    /// Purifying register holding the oracle index.
    pub const COUNTER: &str = "C";
}

/// Which power of the oracle one query applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Forward,
    Inverse,
    Power(i64),
}

impl QueryKind {
    pub fn exponent(self) -> i64 {
        match self {
            QueryKind::Forward => 1,
            QueryKind::Inverse => -1,
            QueryKind::Power(m) => m,
        }
    }
}

impl std::fmt::Display for QueryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryKind::Forward => write!(f, "forward"),
            QueryKind::Inverse => write!(f, "inverse"),
            QueryKind::Power(m) => write!(f, "power({m})"),
        }
    }
}

/// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U`, control qubit first.
pub fn controlled(u: &UnitaryMatrix) -> UnitaryMatrix {
    let d = u.dim();
    let n = 2 * d;
    let mut entries = vec![ZERO; n * n];
    for i in 0..d {
        entries[i * n + i] = ONE;
    }
    for r in 0..d {
        for c in 0..d {
            entries[(d + r) * n + d + c] = u.get(r, c);
        }
    }
    UnitaryMatrix::from_raw(n, entries)
}

fn validate_eigenstate(eigenstate: &[Complex]) -> Result<()> {
    if eigenstate.is_empty() {
        return Err(PhaseLabError::Domain("eigenstate must have dimension >= 1".into()));
    }
    let norm = norm_sq(eigenstate).sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > tol::NORMALIZATION {
        return Err(PhaseLabError::Normalization { norm, tolerance: tol::NORMALIZATION });
    }
    Ok(())
}

/// `{U_y}_{y ∈ [n]}` sharing the eigenstate `u`, with
/// `U_y = ω_n^y |u⟩⟨u| + Σ_{i≥2} |e_i⟩⟨e_i|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOracleFamily {
    n: usize,
    eigenstate: Vec<Complex>,
    basis: Vec<Vec<Complex>>,
}

impl PhaseOracleFamily {
    pub fn new(n: usize, eigenstate: Vec<Complex>) -> Result<Self> {
        if n == 0 {
            return Err(PhaseLabError::Domain("family needs n >= 1".into()));
        }
        validate_eigenstate(&eigenstate)?;
        let basis = complete_orthonormal_basis(&eigenstate, eigenstate.len())?;
        Ok(Self { n, eigenstate, basis })
    }

    /// Work dimension 2 with `u = |0⟩`.
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(n, vec![ONE, ZERO])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn work_dim(&self) -> usize {
        self.eigenstate.len()
    }

    pub fn eigenstate(&self) -> &[Complex] {
        &self.eigenstate
    }

    /// `{u, e_2, …, e_D}`.
    pub fn basis(&self) -> &[Vec<Complex>] {
        &self.basis
    }

    fn check_index(&self, y: usize) -> Result<()> {
        if y >= self.n {
            Err(PhaseLabError::Index { index: y, dim: self.n })
        } else {
            Ok(())
        }
    }

    /// Unitary whose first column is the eigenstate; prepares `|u⟩` from `|0⟩`.
    pub fn eigenstate_preparation(&self) -> UnitaryMatrix {
        let d = self.work_dim();
        let mut entries = vec![ZERO; d * d];
        for (c, col) in self.basis.iter().enumerate() {
            for (r, z) in col.iter().enumerate() {
                entries[r * d + c] = *z;
            }
        }
        UnitaryMatrix::from_raw(d, entries)
    }

    /// `U_y` with the exponent already applied: eigenvalue `ω_n^{y·m}` on `u`.
    fn spectral(&self, phase: Complex) -> UnitaryMatrix {
        let d = self.work_dim();
        let mut entries = vec![ZERO; d * d];
        for (i, v) in self.basis.iter().enumerate() {
            let lambda = if i == 0 { phase } else { ONE };
            for r in 0..d {
                for c in 0..d {
                    entries[r * d + c] += lambda * v[r] * v[c].conj();
                }
            }
        }
        UnitaryMatrix::from_raw(d, entries)
    }

    pub fn u_y_matrix(&self, y: usize) -> Result<UnitaryMatrix> {
        self.check_index(y)?;
        Ok(self.spectral(root_of_unity(y as i64, self.n)))
    }

    /// `U_y^m` for the query kind; `m` is reduced into `[0, n)` first.
    pub fn u_y_power(&self, y: usize, kind: QueryKind) -> Result<UnitaryMatrix> {
        let m = kind.exponent().rem_euclid(self.n as i64);
        Ok(self.u_y_matrix(y)?.power(m))
    }

    /// `c-U_y^{(kind)}` on (control, work).
    pub fn controlled_u(&self, y: usize, kind: QueryKind) -> Result<UnitaryMatrix> {
        Ok(controlled(&self.u_y_power(y, kind)?))
    }

    /// Layout of the coherent oracle: (control, work, counter).
    pub fn coherent_layout(&self) -> RegisterLayout {
        RegisterLayout::new([(labels::CONTROL, 2), (labels::WORK, self.work_dim()), (labels::COUNTER, self.n)])
            .expect("fixed labels are distinct")
    }

    /// `Σ_y c-U_y^{(kind)} ⊗ |y⟩⟨y|_C` as a dense `2·D·n` matrix over
    /// (control, work, counter).
    pub fn coherent_controlled_u(&self, kind: QueryKind) -> UnitaryMatrix {
        let bw = 2 * self.work_dim();
        let n = self.n;
        let dim = bw * n;
        let mut entries = vec![ZERO; dim * dim];
        for y in 0..n {
            let cu = self.controlled_u(y, kind).expect("y < n");
            for r in 0..bw {
                for c in 0..bw {
                    entries[(r * n + y) * dim + c * n + y] = cu.get(r, c);
                }
            }
        }
        UnitaryMatrix::from_raw(dim, entries)
    }
}

/// A single unitary `U` with `U|u⟩ = e^{2πiθ}|u⟩` and identity on `u^⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInstance {
    theta: f64,
    eigenstate: Vec<Complex>,
}

impl PhaseInstance {
    pub fn new(theta: f64, eigenstate: Vec<Complex>) -> Result<Self> {
        if !(0.0..1.0).contains(&theta) {
            return Err(PhaseLabError::Domain(format!("phase {theta} not in [0, 1)")));
        }
        validate_eigenstate(&eigenstate)?;
        Ok(Self { theta, eigenstate })
    }

    /// Work dimension 2 with `u = |0⟩`.
    pub fn standard(theta: f64) -> Result<Self> {
        Self::new(theta, vec![ONE, ZERO])
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn work_dim(&self) -> usize {
        self.eigenstate.len()
    }

    pub fn eigenstate(&self) -> &[Complex] {
        &self.eigenstate
    }
}

/// `I + (e^{2πiθ} − 1)|u⟩⟨u|`.
pub fn phase_unitary(inst: &PhaseInstance) -> UnitaryMatrix {
    let d = inst.work_dim();
    let u = &inst.eigenstate;
    let shift = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * inst.theta) - ONE;
    let mut entries = vec![ZERO; d * d];
    for r in 0..d {
        for c in 0..d {
            let id = if r == c { ONE } else { ZERO };
            entries[r * d + c] = id + shift * u[r] * u[c].conj();
        }
    }
    UnitaryMatrix::from_raw(d, entries)
}

/// Anything that can answer a controlled query on (control, work).
pub trait ControlledOracle {
    fn work_dim(&self) -> usize;
    fn controlled_query(&self, kind: QueryKind) -> Result<UnitaryMatrix>;
}

/// `c-U_y` from a family, for the fixed-y view.
#[derive(Debug, Clone, Copy)]
pub struct FamilyMember<'a> {
    pub family: &'a PhaseOracleFamily,
    pub y: usize,
}

impl ControlledOracle for FamilyMember<'_> {
    fn work_dim(&self) -> usize {
        self.family.work_dim()
    }

    fn controlled_query(&self, kind: QueryKind) -> Result<UnitaryMatrix> {
        self.family.controlled_u(self.y, kind)
    }
}

impl ControlledOracle for PhaseInstance {
    fn work_dim(&self) -> usize {
        PhaseInstance::work_dim(self)
    }

    fn controlled_query(&self, kind: QueryKind) -> Result<UnitaryMatrix> {
        Ok(controlled(&phase_unitary(self).power(kind.exponent())))
    }
}
