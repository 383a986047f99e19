//! Dense complex kernels: register layouts, state vectors, unitary matrices,
//! Gram–Schmidt basis completion and Haar-random unitaries.
//!
//! Amplitudes are stored row-major over the layout: the first-listed register
//! is the most significant digit of the flat index.

use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PhaseLabError, Result};

pub type Complex = Complex64;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);

/// Shared numerical tolerances.
pub mod tol {
    /// Unitarity and normalization checks.
    pub const UNITARITY: f64 = 1e-9;
    pub const NORMALIZATION: f64 = 1e-9;
    /// Entrywise amplitude equality.
    pub const AMPLITUDE: f64 = 1e-10;
    /// Probability comparisons.
    pub const PROBABILITY: f64 = 1e-9;
    /// Gram–Schmidt candidates with a smaller residual norm are skipped.
    pub const RESIDUAL: f64 = 1e-8;
}

/// `e^{2 pi i num / den}` with the numerator reduced first so large powers of a
/// root of unity do not lose precision.
pub fn root_of_unity(num: i64, den: usize) -> Complex {
    let den_i = den as i64;
    let m = num.rem_euclid(den_i);
    Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * (m as f64) / (den as f64))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    total_dim: usize,
}

impl RegisterLayout {
    pub fn new<I, S>(registers: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut regs: Vec<Register> = Vec::new();
        let mut total = 1usize;
        for (label, dim) in registers {
            let label = label.into();
            if dim == 0 {
                return Err(PhaseLabError::Shape(format!("register `{label}` has dimension 0")));
            }
            if regs.iter().any(|r| r.label == label) {
                return Err(PhaseLabError::DuplicateLabel(label));
            }
            total = total.checked_mul(dim).ok_or_else(|| PhaseLabError::Shape("total dimension overflows".into()))?;
            regs.push(Register { label, dim });
        }
        if regs.is_empty() {
            return Err(PhaseLabError::Shape("layout needs at least one register".into()));
        }
        Ok(Self { registers: regs, total_dim: total })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.registers.iter().position(|r| r.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label).map(|i| self.registers[i].dim).ok_or_else(|| PhaseLabError::Label(label.to_string()))
    }

    /// Distance in the flat index between consecutive values of register `pos`.
    pub fn stride(&self, pos: usize) -> usize {
        self.registers[pos + 1..].iter().map(|r| r.dim).product()
    }

    /// Appends the registers of `other` after those of `self`.
    pub fn concat(&self, other: &RegisterLayout) -> Result<Self> {
        Self::new(self.registers.iter().chain(other.registers.iter()).map(|r| (r.label.clone(), r.dim)))
    }

    /// Flat index of a full assignment of register values, given in layout order.
    pub fn flat_index(&self, values: &[usize]) -> Result<usize> {
        if values.len() != self.registers.len() {
            return Err(PhaseLabError::Shape(format!(
                "expected {} register values, got {}",
                self.registers.len(),
                values.len()
            )));
        }
        let mut idx = 0usize;
        for (v, r) in values.iter().zip(&self.registers) {
            if *v >= r.dim {
                return Err(PhaseLabError::Index { index: *v, dim: r.dim });
            }
            idx = idx * r.dim + v;
        }
        Ok(idx)
    }

    /// Value held by register `pos` at flat index `index`.
    pub fn digit(&self, index: usize, pos: usize) -> usize {
        (index / self.stride(pos)) % self.registers[pos].dim
    }

    fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l).ok_or_else(|| PhaseLabError::Label(l.to_string()))?;
            if out.contains(&p) {
                return Err(PhaseLabError::DuplicateLabel(l.to_string()));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Flat offsets of every joint value of the registers at `positions`, in
    /// row-major order over `positions` as given.
    fn offsets(&self, positions: &[usize]) -> Vec<usize> {
        let mut offs = vec![0usize];
        for &p in positions {
            let stride = self.stride(p);
            let dim = self.registers[p].dim;
            let mut next = Vec::with_capacity(offs.len() * dim);
            for &o in &offs {
                for v in 0..dim {
                    next.push(o + v * stride);
                }
            }
            offs = next;
        }
        offs
    }
}

impl fmt::Display for RegisterLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.registers.iter().map(|r| format!("{}:{}", r.label, r.dim)).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Amplitude vector over a register layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: Vec<Complex>,
    unnormalized: bool,
}

fn check_finite(amps: &[Complex]) -> Result<()> {
    if amps.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
        Ok(())
    } else {
        Err(PhaseLabError::NonFinite)
    }
}

pub(crate) fn norm_sq(v: &[Complex]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

impl StateVector {
    /// Unit state; fails if the norm deviates from 1 by more than 1e-9.
    pub fn new(layout: RegisterLayout, amps: Vec<Complex>) -> Result<Self> {
        let s = Self::unnormalized(layout, amps)?;
        let norm = s.norm();
        if (norm - 1.0).abs() > tol::NORMALIZATION {
            return Err(PhaseLabError::Normalization { norm, tolerance: tol::NORMALIZATION });
        }
        Ok(Self { unnormalized: false, ..s })
    }

    /// Intermediate vector exempt from the unit-norm invariant.
    pub fn unnormalized(layout: RegisterLayout, amps: Vec<Complex>) -> Result<Self> {
        if amps.len() != layout.total_dim() {
            return Err(PhaseLabError::Shape(format!(
                "layout {layout} needs {} amplitudes, got {}",
                layout.total_dim(),
                amps.len()
            )));
        }
        check_finite(&amps)?;
        Ok(Self { layout, amps, unnormalized: true })
    }

    /// Single-register vector labeled `v`.
    pub fn plain(amps: Vec<Complex>) -> Result<Self> {
        let layout = RegisterLayout::single("v", amps.len())?;
        Self::new(layout, amps)
    }

    pub fn basis(layout: RegisterLayout, index: usize) -> Result<Self> {
        let dim = layout.total_dim();
        if index >= dim {
            return Err(PhaseLabError::Index { index, dim });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { layout, amps, unnormalized: false })
    }

    /// The all-zeros computational basis state.
    pub fn zero(layout: RegisterLayout) -> Self {
        Self::basis(layout, 0).expect("index 0 is always in range")
    }

    /// `self ⊗ other`, with `self`'s registers first.
    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        let mut amps = Vec::with_capacity(layout.total_dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(Self { layout, amps, unnormalized: self.unnormalized || other.unnormalized })
    }

    /// Same amplitudes under a relabeled layout of equal shape.
    pub fn relabel(&self, layout: RegisterLayout) -> Result<Self> {
        if layout.total_dim() != self.layout.total_dim() {
            return Err(PhaseLabError::Shape(format!("cannot relabel {} as {layout}", self.layout)));
        }
        Ok(Self { layout, amps: self.amps.clone(), unnormalized: self.unnormalized })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex> {
        self.amps
    }

    pub fn is_unnormalized(&self) -> bool {
        self.unnormalized
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.amps)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Amplitude of the basis state with the given register values (layout order).
    pub fn amplitude(&self, values: &[usize]) -> Result<Complex> {
        Ok(self.amps[self.layout.flat_index(values)?])
    }

    /// Largest entrywise modulus of the difference; layouts must match in size.
    pub fn max_abs_diff(&self, other: &StateVector) -> Result<f64> {
        if self.amps.len() != other.amps.len() {
            return Err(PhaseLabError::Shape("state dimensions differ".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Computational-basis marginal distribution of one register.
    pub fn marginal(&self, label: &str) -> Result<Vec<f64>> {
        let pos = self.layout.position(label).ok_or_else(|| PhaseLabError::Label(label.into()))?;
        let dim = self.layout.registers()[pos].dim;
        let stride = self.layout.stride(pos);
        let mut probs = vec![0.0; dim];
        for (i, a) in self.amps.iter().enumerate() {
            probs[(i / stride) % dim] += a.norm_sqr();
        }
        Ok(probs)
    }

    pub(crate) fn with_amplitudes(&self, amps: Vec<Complex>) -> Self {
        debug_assert_eq!(amps.len(), self.amps.len());
        Self { layout: self.layout.clone(), amps, unnormalized: self.unnormalized }
    }
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex> {
    if a.layout != b.layout {
        return Err(PhaseLabError::Shape(format!("inner product of {} with {}", a.layout, b.layout)));
    }
    Ok(dot(&a.amps, &b.amps))
}

pub(crate) fn dot(a: &[Complex], b: &[Complex]) -> Complex {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense square matrix known to be unitary within 1e-9.
#[derive(Clone, PartialEq)]
pub struct UnitaryMatrix {
    dim: usize,
    entries: Vec<Complex>,
}

impl fmt::Debug for UnitaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "UnitaryMatrix({}x{})", self.dim, self.dim)?;
        if self.dim <= 8 {
            for r in 0..self.dim {
                let row: Vec<String> = (0..self.dim)
                    .map(|c| {
                        let z = self.get(r, c);
                        format!("{:+.4}{:+.4}i", z.re, z.im)
                    })
                    .collect();
                writeln!(f, "  {}", row.join(" "))?;
            }
        }
        Ok(())
    }
}

impl UnitaryMatrix {
    /// Checked constructor from row-major entries.
    pub fn new(dim: usize, entries: Vec<Complex>) -> Result<Self> {
        if dim == 0 {
            return Err(PhaseLabError::Domain("matrix dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(PhaseLabError::Shape(format!(
                "{dim}x{dim} matrix needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        check_finite(&entries)?;
        let m = Self { dim, entries };
        let deviation = m.unitarity_deviation();
        if deviation > tol::UNITARITY {
            return Err(PhaseLabError::NotUnitary { deviation });
        }
        Ok(m)
    }

    /// For constructions that are unitary by construction; tests cover each caller.
    pub(crate) fn from_raw(dim: usize, entries: Vec<Complex>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex) -> Result<Self> {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        Self::new(dim, entries)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<Complex>]) -> Result<Self> {
        let dim = columns.len();
        if columns.iter().any(|c| c.len() != dim) {
            return Err(PhaseLabError::Shape("columns must form a square matrix".into()));
        }
        Self::from_fn(dim, |r, c| columns[c][r])
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self { dim, entries }
    }

    pub fn diagonal(diag: &[Complex]) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![ZERO; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            entries[i * dim + i] = *d;
        }
        Self::new(dim, entries)
    }

    /// Permutation matrix sending `|i⟩` to `|perm[i]⟩`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let dim = perm.len();
        let mut seen = vec![false; dim];
        for &p in perm {
            if p >= dim || seen[p] {
                return Err(PhaseLabError::Domain("not a permutation".into()));
            }
            seen[p] = true;
        }
        let mut entries = vec![ZERO; dim * dim];
        for (i, &p) in perm.iter().enumerate() {
            entries[p * dim + i] = ONE;
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Complex] {
        &self.entries
    }

    pub fn column(&self, col: usize) -> Vec<Complex> {
        (0..self.dim).map(|r| self.get(r, col)).collect()
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                entries[c * d + r] = self.entries[r * d + c].conj();
            }
        }
        Self { dim: d, entries }
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &UnitaryMatrix) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(PhaseLabError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.dim, self.dim, rhs.dim, rhs.dim
            )));
        }
        Ok(Self { dim: self.dim, entries: matmul_raw(self.dim, &self.entries, &rhs.entries) })
    }

    /// `self ⊗ rhs`.
    pub fn kron(&self, rhs: &UnitaryMatrix) -> Self {
        let (a, b) = (self.dim, rhs.dim);
        let d = a * b;
        let mut entries = vec![ZERO; d * d];
        for r1 in 0..a {
            for c1 in 0..a {
                let x = self.entries[r1 * a + c1];
                if x == ZERO {
                    continue;
                }
                for r2 in 0..b {
                    for c2 in 0..b {
                        entries[(r1 * b + r2) * d + c1 * b + c2] = x * rhs.entries[r2 * b + c2];
                    }
                }
            }
        }
        Self { dim: d, entries }
    }

    /// Integer power; negative exponents use the adjoint.
    pub fn power(&self, exponent: i64) -> Self {
        let base = if exponent < 0 { self.adjoint() } else { self.clone() };
        let mut e = exponent.unsigned_abs();
        let mut acc = Self::identity(self.dim);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = Self { dim: self.dim, entries: matmul_raw(self.dim, &acc.entries, &sq.entries) };
            }
            e >>= 1;
            if e > 0 {
                sq = Self { dim: self.dim, entries: matmul_raw(self.dim, &sq.entries, &sq.entries) };
            }
        }
        acc
    }

    /// Max entrywise `|U†U − I|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = ZERO;
                for k in 0..d {
                    s += self.entries[k * d + i].conj() * self.entries[k * d + j];
                }
                if i == j {
                    s -= ONE;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &UnitaryMatrix) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// `U v` for a plain vector of matching length.
    pub fn apply_vec(&self, v: &[Complex]) -> Result<Vec<Complex>> {
        if v.len() != self.dim {
            return Err(PhaseLabError::Shape(format!(
                "vector of length {} against {}x{} matrix",
                v.len(),
                self.dim,
                self.dim
            )));
        }
        Ok((0..self.dim)
            .map(|r| self.entries[r * self.dim..(r + 1) * self.dim].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Row-compressed nonzero pattern.
    fn sparse_rows(&self) -> Vec<Vec<(usize, Complex)>> {
        (0..self.dim)
            .map(|r| {
                self.entries[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .enumerate()
                    .filter(|(_, z)| **z != ZERO)
                    .map(|(c, z)| (c, *z))
                    .collect()
            })
            .collect()
    }
}

fn matmul_raw(d: usize, a: &[Complex], b: &[Complex]) -> Vec<Complex> {
    let mut out = vec![ZERO; d * d];
    for r in 0..d {
        let row = &mut out[r * d..(r + 1) * d];
        for k in 0..d {
            let x = a[r * d + k];
            if x == ZERO {
                continue;
            }
            for (o, y) in row.iter_mut().zip(&b[k * d..(k + 1) * d]) {
                *o += x * y;
            }
        }
    }
    out
}

/// `(U ⊗ I_rest)|state⟩` where `U` acts on `targets` (first target most significant).
pub fn apply_to_registers(state: &StateVector, u: &UnitaryMatrix, targets: &[&str]) -> Result<StateVector> {
    let layout = state.layout();
    let positions = layout.positions(targets)?;
    let target_dim: usize = positions.iter().map(|&p| layout.registers()[p].dim).product();
    if target_dim != u.dim() {
        return Err(PhaseLabError::Shape(format!(
            "unitary of dimension {} applied to registers {:?} of joint dimension {target_dim}",
            u.dim(),
            targets
        )));
    }
    let rest: Vec<usize> = (0..layout.registers().len()).filter(|p| !positions.contains(p)).collect();
    let target_offsets = layout.offsets(&positions);
    let base_offsets = layout.offsets(&rest);
    let rows = u.sparse_rows();

    let amps = state.amplitudes();
    let mut out = vec![ZERO; amps.len()];
    let mut gathered = vec![ZERO; target_dim];
    for &base in &base_offsets {
        for (g, &off) in gathered.iter_mut().zip(&target_offsets) {
            *g = amps[base + off];
        }
        for (row, &off) in rows.iter().zip(&target_offsets) {
            out[base + off] = row.iter().map(|&(c, z)| z * gathered[c]).sum();
        }
    }
    Ok(state.with_amplitudes(out))
}

/// `||Π_value state||²` for a computational-basis value of one register.
pub fn projection_norm_sq(state: &StateVector, register: &str, value: usize) -> Result<f64> {
    let layout = state.layout();
    let pos = layout.position(register).ok_or_else(|| PhaseLabError::Label(register.into()))?;
    let dim = layout.registers()[pos].dim;
    if value >= dim {
        return Err(PhaseLabError::Index { index: value, dim });
    }
    let stride = layout.stride(pos);
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| (i / stride) % dim == value)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

fn subtract_projections(v: &mut [Complex], basis: &[Vec<Complex>]) {
    for b in basis {
        let c = dot(b, v);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
}

/// Orthonormal basis of `C^dim` whose first element is `u`.
///
/// Completion candidates are the computational basis vectors in index order;
/// a candidate whose residual after projection has norm below 1e-8 is skipped.
pub fn complete_orthonormal_basis(u: &[Complex], dim: usize) -> Result<Vec<Vec<Complex>>> {
    if u.len() != dim {
        return Err(PhaseLabError::Shape(format!("vector of length {} in dimension {dim}", u.len())));
    }
    check_finite(u)?;
    let norm = norm_sq(u).sqrt();
    if (norm - 1.0).abs() > tol::NORMALIZATION {
        return Err(PhaseLabError::Normalization { norm, tolerance: tol::NORMALIZATION });
    }
    let mut basis: Vec<Vec<Complex>> = vec![u.to_vec()];
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = vec![ZERO; dim];
        v[i] = ONE;
        // two passes keep the result orthogonal to working precision
        subtract_projections(&mut v, &basis);
        subtract_projections(&mut v, &basis);
        let r = norm_sq(&v).sqrt();
        if r < tol::RESIDUAL {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= r);
        basis.push(v);
    }
    debug_assert_eq!(basis.len(), dim);
    Ok(basis)
}

/// Haar-distributed unitary, deterministic in `seed`.
pub fn haar_random_unitary(dim: usize, seed: u64) -> Result<UnitaryMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_random_unitary_with(dim, &mut rng)
}

/// Haar unitary from a caller-supplied generator.
///
/// Orthonormalizes the columns of a complex Ginibre matrix. Gram–Schmidt gives
/// the QR factor with a positive real diagonal in `R`, which is the phase
/// convention that makes `Q` Haar distributed.
pub fn haar_random_unitary_with<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return Err(PhaseLabError::Domain("Haar unitary needs dimension >= 1".into()));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut cols: Vec<Vec<Complex>> = (0..dim)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex::new(re * scale, im * scale)
                })
                .collect()
        })
        .collect();
    for j in 0..dim {
        let (done, rest) = cols.split_at_mut(j);
        let v = &mut rest[0];
        for _ in 0..2 {
            for q in done.iter() {
                let c = dot(q, v);
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        let r = norm_sq(v).sqrt();
        if r < tol::RESIDUAL {
            return Err(PhaseLabError::Domain("degenerate Gaussian sample".into()));
        }
        v.iter_mut().for_each(|x| *x /= r);
    }
    let mut entries = vec![ZERO; dim * dim];
    for (c, col) in cols.iter().enumerate() {
        for (r, z) in col.iter().enumerate() {
            entries[r * dim + c] = *z;
        }
    }
    Ok(UnitaryMatrix::from_raw(dim, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn two_qubits() -> RegisterLayout {
        RegisterLayout::new([("a", 2), ("b", 2)]).unwrap()
    }

    #[test]
    fn layout_rejects_bad_registers() {
        assert!(RegisterLayout::new([("a", 2), ("a", 3)]).is_err());
        assert!(RegisterLayout::new([("a", 0)]).is_err());
        let l = RegisterLayout::new([("a", 2), ("b", 3), ("c", 5)]).unwrap();
        assert_eq!(l.total_dim(), 30);
        assert_eq!(l.stride(0), 15);
        assert_eq!(l.flat_index(&[1, 2, 3]).unwrap(), 15 + 10 + 3);
        assert_eq!(l.digit(28, 1), 2);
    }

    #[test]
    fn inner_product_basics() {
        let l = RegisterLayout::single("v", 2).unwrap();
        let e0 = StateVector::basis(l.clone(), 0).unwrap();
        let e1 = StateVector::basis(l.clone(), 1).unwrap();
        assert_eq!(inner_product(&e0, &e0).unwrap(), ONE);
        assert_eq!(inner_product(&e0, &e1).unwrap(), ZERO);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(l.clone(), vec![c(h, 0.0), c(h, 0.0)]).unwrap();
        let minus = StateVector::new(l, vec![c(h, 0.0), c(-h, 0.0)]).unwrap();
        assert!(inner_product(&plus, &minus).unwrap().norm() < 1e-15);
    }

    #[test]
    fn inner_product_conjugates_left() {
        let l = RegisterLayout::single("v", 1).unwrap();
        let a = StateVector::new(l.clone(), vec![c(0.0, 1.0)]).unwrap();
        let b = StateVector::new(l, vec![ONE]).unwrap();
        assert_eq!(inner_product(&a, &b).unwrap(), c(0.0, -1.0));
    }

    #[test]
    fn inner_product_layout_mismatch() {
        let a = StateVector::zero(RegisterLayout::single("v", 2).unwrap());
        let b = StateVector::zero(RegisterLayout::single("w", 2).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(PhaseLabError::Shape(_))));
    }

    #[test]
    fn state_constructor_checks() {
        let l = RegisterLayout::single("v", 2).unwrap();
        assert!(matches!(StateVector::new(l.clone(), vec![ONE, ONE]), Err(PhaseLabError::Normalization { .. })));
        assert!(StateVector::unnormalized(l.clone(), vec![ONE, ONE]).unwrap().is_unnormalized());
        assert!(matches!(StateVector::new(l.clone(), vec![c(f64::NAN, 0.0), ZERO]), Err(PhaseLabError::NonFinite)));
        assert!(StateVector::new(l, vec![ONE]).is_err());
    }

    #[test]
    fn apply_x_to_first_register() {
        let x = UnitaryMatrix::permutation(&[1, 0]).unwrap();
        let s = StateVector::zero(two_qubits());
        let out = apply_to_registers(&s, &x, &["a"]).unwrap();
        assert_eq!(out.amplitude(&[1, 0]).unwrap(), ONE);
        let out = apply_to_registers(&s, &x, &["b"]).unwrap();
        assert_eq!(out.amplitude(&[0, 1]).unwrap(), ONE);
    }

    #[test]
    fn apply_identity_and_inverse() {
        let layout = RegisterLayout::new([("a", 3), ("b", 2), ("c", 4)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi_u = haar_random_unitary_with(24, &mut rng).unwrap();
        let s = StateVector::new(layout, psi_u.column(0)).unwrap();
        let id = UnitaryMatrix::identity(8);
        assert!(apply_to_registers(&s, &id, &["c", "b"]).unwrap().max_abs_diff(&s).unwrap() < 1e-15);
        let u = haar_random_unitary(8, 11).unwrap();
        let there = apply_to_registers(&s, &u, &["c", "b"]).unwrap();
        let back = apply_to_registers(&there, &u.adjoint(), &["c", "b"]).unwrap();
        assert!(back.max_abs_diff(&s).unwrap() < 1e-12);
        assert!((there.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_target_order_matters() {
        // CNOT with control listed first
        let cnot = UnitaryMatrix::permutation(&[0, 1, 3, 2]).unwrap();
        let s = StateVector::basis(two_qubits(), 2).unwrap(); // a=1, b=0
        let out = apply_to_registers(&s, &cnot, &["a", "b"]).unwrap();
        assert_eq!(out.amplitude(&[1, 1]).unwrap(), ONE);
        let out = apply_to_registers(&s, &cnot, &["b", "a"]).unwrap();
        assert_eq!(out.amplitude(&[1, 0]).unwrap(), ONE);
    }

    #[test]
    fn apply_dimension_mismatch() {
        let s = StateVector::zero(two_qubits());
        let u = UnitaryMatrix::identity(3);
        assert!(matches!(apply_to_registers(&s, &u, &["a"]), Err(PhaseLabError::Shape(_))));
        assert!(matches!(apply_to_registers(&s, &UnitaryMatrix::identity(2), &["z"]), Err(PhaseLabError::Label(_))));
    }

    #[test]
    fn projection_examples() {
        let l = RegisterLayout::single("v", 2).unwrap();
        assert_eq!(projection_norm_sq(&StateVector::zero(l.clone()), "v", 0).unwrap(), 1.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(l.clone(), vec![c(h, 0.0), c(h, 0.0)]).unwrap();
        assert!((projection_norm_sq(&plus, "v", 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(projection_norm_sq(&plus, "v", 2), Err(PhaseLabError::Index { .. })));
    }

    #[test]
    fn basis_completion_from_e0() {
        let b = complete_orthonormal_basis(&[ONE, ZERO], 2).unwrap();
        assert_eq!(b, vec![vec![ONE, ZERO], vec![ZERO, ONE]]);
    }

    #[test]
    fn basis_completion_from_plus() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = vec![c(h, 0.0), c(h, 0.0)];
        let b = complete_orthonormal_basis(&u, 2).unwrap();
        assert_eq!(b[0], u);
        // Gram matrix by direct summation
        for i in 0..2 {
            for j in 0..2 {
                let g: Complex = (0..2).map(|k| b[i][k].conj() * b[j][k]).sum();
                let expect = if i == j { ONE } else { ZERO };
                assert!((g - expect).norm() < 1e-12, "G[{i}][{j}] = {g}");
            }
        }
        // residual of e_0 is (1/2, -1/2), normalized
        assert!((b[1][0] - c(h, 0.0)).norm() < 1e-12);
        assert!((b[1][1] - c(-h, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn basis_completion_rejects_non_unit() {
        assert!(matches!(complete_orthonormal_basis(&[ZERO, ZERO], 2), Err(PhaseLabError::Normalization { .. })));
        assert!(matches!(
            complete_orthonormal_basis(&[c(2.0, 0.0), ZERO], 2),
            Err(PhaseLabError::Normalization { .. })
        ));
    }

    #[test]
    fn basis_completion_random_is_orthonormal() {
        for seed in 0..20 {
            let dim = 1 + (seed as usize % 9);
            let u = haar_random_unitary(dim, seed).unwrap().column(0);
            let b = complete_orthonormal_basis(&u, dim).unwrap();
            assert_eq!(b.len(), dim);
            for i in 0..dim {
                for j in 0..dim {
                    let g = dot(&b[i], &b[j]);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - Complex::new(expect, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn haar_examples() {
        let u1 = haar_random_unitary(1, 5).unwrap();
        assert!((u1.get(0, 0).norm() - 1.0).abs() < 1e-12);
        assert_eq!(haar_random_unitary(6, 42).unwrap(), haar_random_unitary(6, 42).unwrap());
        assert_ne!(haar_random_unitary(6, 42).unwrap(), haar_random_unitary(6, 43).unwrap());
        for seed in 0..5 {
            assert!(haar_random_unitary(8, seed).unwrap().unitarity_deviation() < 1e-9);
        }
        assert!(matches!(haar_random_unitary(0, 1), Err(PhaseLabError::Domain(_))));
    }

    #[test]
    fn haar_first_moment_is_flat() {
        // E|U_00|^2 = 1/d for Haar measure
        let d = 4;
        let trials = 4000;
        let mean: f64 =
            (0..trials).map(|s| haar_random_unitary(d, s).unwrap().get(0, 0).norm_sqr()).sum::<f64>() / trials as f64;
        assert!((mean - 0.25).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn unitary_constructor_rejects_non_unitary() {
        let r = UnitaryMatrix::new(2, vec![ONE, ONE, ZERO, ONE]);
        assert!(matches!(r, Err(PhaseLabError::NotUnitary { .. })));
        assert!(UnitaryMatrix::new(2, vec![ONE]).is_err());
        assert!(UnitaryMatrix::permutation(&[0, 0]).is_err());
    }

    #[test]
    fn power_and_kron() {
        let u = haar_random_unitary(3, 9).unwrap();
        let cube = u.matmul(&u).unwrap().matmul(&u).unwrap();
        assert!(u.power(3).max_abs_diff(&cube) < 1e-12);
        assert!(u.power(-2).matmul(&u.power(2)).unwrap().max_abs_diff(&UnitaryMatrix::identity(3)) < 1e-12);
        let k = u.kron(&UnitaryMatrix::identity(2));
        assert_eq!(k.dim(), 6);
        assert!(k.unitarity_deviation() < 1e-12);
        assert_eq!(k.get(2, 4), u.get(1, 2));
    }
}
