//! Optimal phase-distinguishing algorithms, the Fourier-transform phase
//! estimator on continuous phases, grid rounding and the estimator-to-PD
//! reduction, and the maximally entangled pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PhaseLabError, Result};
use crate::fourier::{conjugate_fourier_state_on, fourier_state_on, inverse_qft_matrix, qft_matrix};
use crate::linalg::{complete_orthonormal_basis, tol, Complex, RegisterLayout, StateVector, UnitaryMatrix, ZERO};
use crate::oracles::{labels, PhaseInstance, PhaseOracleFamily};
use crate::purified::{output_distribution, run_with_oracle, sample_outcome, QueryAlgorithm, Step};

/// Flips `B` iff `O == j`, on (O, B). Equal to `P_{j+1} P_j` where `P_j` flips
/// `B` iff `O >= j`.
fn flip_control_on_output_eq(n: usize, j: usize) -> UnitaryMatrix {
    let perm: Vec<usize> = (0..2 * n).map(|i| if i / 2 == j { i ^ 1 } else { i }).collect();
    UnitaryMatrix::permutation(&perm).expect("valid permutation")
}

/// Flips `B` iff `O >= j`, on (O, B).
fn flip_control_on_output_ge(n: usize, j: usize) -> UnitaryMatrix {
    let perm: Vec<usize> = (0..2 * n).map(|i| if i / 2 >= j { i ^ 1 } else { i }).collect();
    UnitaryMatrix::permutation(&perm).expect("valid permutation")
}

/// Unitary on `O` mapping `|0⟩` to the uniform superposition of `|0⟩..|q⟩`.
fn truncated_superposition(n: usize, q: usize) -> Result<UnitaryMatrix> {
    let s = 1.0 / ((q + 1) as f64).sqrt();
    let v: Vec<Complex> = (0..n).map(|k| if k <= q { Complex::new(s, 0.0) } else { ZERO }).collect();
    let basis = complete_orthonormal_basis(&v, n)?;
    UnitaryMatrix::from_columns(&basis)
}

/// The `q`-query algorithm that reaches success `(q+1)/n` on the family:
///
/// 1. prepare `(q+1)^{-1/2} Σ_{k≤q} |k⟩_O` and `|u⟩_W`;
/// 2. for `j = 1..q`, set `B = [O ≥ j]` and query, so branch `k` picks up `U^k`;
/// 3. uncompute `B` and apply `QFT_n†` to `O`.
pub fn build_truncated_optimal_for(family: &PhaseOracleFamily, q: usize) -> Result<QueryAlgorithm> {
    let n = family.n();
    if q >= n {
        return Err(PhaseLabError::Domain(format!("q = {q} must satisfy q <= n - 1 = {}", n - 1)));
    }
    let d = family.work_dim();
    let layout = QueryAlgorithm::standard_layout(n, d)?;
    let prep = truncated_superposition(n, q)?.kron(&UnitaryMatrix::identity(2)).kron(&family.eigenstate_preparation());
    let all = [labels::OUTPUT, labels::CONTROL, labels::WORK];
    let ob = [labels::OUTPUT, labels::CONTROL];
    let iqft = inverse_qft_matrix(n)?.kron(&UnitaryMatrix::identity(2));

    let mut steps = Vec::with_capacity(q + 1);
    if q == 0 {
        let first = iqft.kron(&UnitaryMatrix::identity(d)).matmul(&prep)?;
        steps.push(Step::new(all, first));
    } else {
        let first = flip_control_on_output_ge(n, 1).kron(&UnitaryMatrix::identity(d)).matmul(&prep)?;
        steps.push(Step::new(all, first));
        for j in 1..q {
            steps.push(Step::new(ob, flip_control_on_output_eq(n, j)));
        }
        steps.push(Step::new(ob, iqft.matmul(&flip_control_on_output_ge(n, q))?));
    }
    QueryAlgorithm::new(n, layout, steps, vec![crate::oracles::QueryKind::Forward; q])
}

/// [`build_truncated_optimal_for`] on the default family (work dimension 2, `u = |0⟩`).
pub fn build_truncated_optimal(n: usize, q: usize) -> Result<QueryAlgorithm> {
    build_truncated_optimal_for(&PhaseOracleFamily::standard(n)?, q)
}

/// Textbook phase estimation: uniform superposition on `O`, controlled-add of
/// the oracle in `n − 1` queries, inverse QFT on `O`.
pub fn build_cemm_for(family: &PhaseOracleFamily) -> Result<QueryAlgorithm> {
    let n = family.n();
    let d = family.work_dim();
    let layout = QueryAlgorithm::standard_layout(n, d)?;
    let id2 = UnitaryMatrix::identity(2);
    let prep = qft_matrix(n)?.kron(&id2).kron(&family.eigenstate_preparation());
    let iqft = inverse_qft_matrix(n)?.kron(&id2);
    let all = [labels::OUTPUT, labels::CONTROL, labels::WORK];
    let ob = [labels::OUTPUT, labels::CONTROL];
    let q = n - 1;

    let mut steps = Vec::with_capacity(n);
    if q == 0 {
        steps.push(Step::new(all, iqft.kron(&UnitaryMatrix::identity(d)).matmul(&prep)?));
    } else {
        let first = flip_control_on_output_ge(n, 1).kron(&UnitaryMatrix::identity(d)).matmul(&prep)?;
        steps.push(Step::new(all, first));
        for j in 1..q {
            let uncompute = flip_control_on_output_ge(n, j);
            steps.push(Step::new(ob, flip_control_on_output_ge(n, j + 1).matmul(&uncompute)?));
        }
        steps.push(Step::new(ob, iqft.matmul(&flip_control_on_output_ge(n, q))?));
    }
    QueryAlgorithm::new(n, layout, steps, vec![crate::oracles::QueryKind::Forward; q])
}

pub fn build_cemm(n: usize) -> Result<QueryAlgorithm> {
    if n == 0 {
        return Err(PhaseLabError::Domain("n must be at least 1".into()));
    }
    build_cemm_for(&PhaseOracleFamily::standard(n)?)
}

/// Exact outcome distribution of the `n`-point phase estimation circuit run
/// against `e^{2πiθ}|u⟩⟨u| + (I − |u⟩⟨u|)`.
pub fn cemm_on_continuous_phase(inst: &PhaseInstance, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(PhaseLabError::Domain("grid size must be at least 2".into()));
    }
    let family = PhaseOracleFamily::new(n, inst.eigenstate().to_vec())?;
    let alg = build_cemm_for(&family)?;
    output_distribution(&run_with_oracle(&alg, inst)?)
}

/// How the error `|θ̃ − θ|` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    /// `min(|a − b|, 1 − |a − b|)`: phases as angles.
    #[default]
    Circular,
    /// Plain `|a − b|` on `[0, 1)`.
    Absolute,
}

pub fn phase_distance(a: f64, b: f64, metric: DistanceMetric) -> f64 {
    let d = (a - b).abs();
    match metric {
        DistanceMetric::Circular => {
            let d = d.rem_euclid(1.0);
            d.min(1.0 - d)
        }
        DistanceMetric::Absolute => d,
    }
}

/// A phase estimate `θ̂ ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    pub theta_hat: f64,
    pub n_grid: usize,
}

impl PhaseEstimate {
    pub fn new(theta_hat: f64, n_grid: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&theta_hat) {
            return Err(PhaseLabError::Domain(format!("estimate {theta_hat} not in [0, 1)")));
        }
        Ok(Self { theta_hat, n_grid })
    }

    /// Wraps any finite real into `[0, 1)`.
    pub fn wrapped(theta: f64, n_grid: usize) -> Result<Self> {
        if !theta.is_finite() {
            return Err(PhaseLabError::NonFinite);
        }
        let mut t = theta.rem_euclid(1.0);
        if t >= 1.0 {
            t = 0.0;
        }
        Self::new(t, n_grid)
    }
}

/// Nearest grid index `y` to `θ̂` under circular distance; ties go to the smaller `y`.
pub fn round_to_grid(est: &PhaseEstimate, n: usize) -> usize {
    round_to_grid_with(est.theta_hat, n, DistanceMetric::Circular)
}

pub fn round_to_grid_with(theta_hat: f64, n: usize, metric: DistanceMetric) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for y in 0..n {
        let d = phase_distance(theta_hat, y as f64 / n as f64, metric);
        if d < best_d {
            best = y;
            best_d = d;
        }
    }
    best
}

/// `⌊1/(2ε)⌋`, the grid on which an `ε`-estimator decides `PD_N`.
pub fn grid_size_for_epsilon(epsilon: f64) -> Result<usize> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(PhaseLabError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if epsilon >= 0.5 {
        return Err(PhaseLabError::Domain(format!("epsilon {epsilon} >= 1/2 leaves no grid to decide")));
    }
    Ok((1.0 / (2.0 * epsilon)).floor() as usize)
}

/// A phase estimator callable on oracle instances.
pub trait PhaseEstimator {
    fn estimate(&mut self, oracle: &PhaseInstance) -> Result<PhaseEstimate>;
}

/// Reads the phase off the instance. Success 1 everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactEstimator;

impl PhaseEstimator for ExactEstimator {
    fn estimate(&mut self, oracle: &PhaseInstance) -> Result<PhaseEstimate> {
        PhaseEstimate::new(oracle.theta(), 0)
    }
}

/// What a [`SyntheticEstimator`] reports when it misses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum FailureMode {
    /// A uniformly random phase.
    #[default]
    Uniform,
    /// The antipode `θ + 1/2`, which never rounds to the right grid point.
    Antipodal,
}

/// With probability `p`, returns `θ` plus uniform noise of the given radius;
/// otherwise a phase chosen by the [`FailureMode`].
#[derive(Debug, Clone)]
pub struct SyntheticEstimator {
    p: f64,
    radius: f64,
    failure: FailureMode,
    rng: ChaCha8Rng,
}

impl SyntheticEstimator {
    pub fn new(p: f64, radius: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(PhaseLabError::Domain(format!("p = {p} not a probability")));
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(PhaseLabError::Domain(format!("radius {radius} invalid")));
        }
        Ok(Self { p, radius, failure: FailureMode::default(), rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn with_failure_mode(mut self, failure: FailureMode) -> Self {
        self.failure = failure;
        self
    }
}

impl PhaseEstimator for SyntheticEstimator {
    fn estimate(&mut self, oracle: &PhaseInstance) -> Result<PhaseEstimate> {
        let theta = oracle.theta();
        let hit = self.rng.random::<f64>() < self.p;
        let raw = if hit {
            let noise = if self.radius > 0.0 { self.rng.random_range(-self.radius..self.radius) } else { 0.0 };
            theta + noise
        } else {
            match self.failure {
                FailureMode::Uniform => self.rng.random::<f64>(),
                FailureMode::Antipodal => theta + 0.5,
            }
        };
        PhaseEstimate::wrapped(raw, 0)
    }
}

/// Runs the `n`-point phase estimation circuit and samples its outcome.
#[derive(Debug, Clone)]
pub struct CemmEstimator {
    n: usize,
    rng: ChaCha8Rng,
}

impl CemmEstimator {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(PhaseLabError::Domain("grid size must be at least 2".into()));
        }
        Ok(Self { n, rng: ChaCha8Rng::seed_from_u64(seed) })
    }
}

impl PhaseEstimator for CemmEstimator {
    fn estimate(&mut self, oracle: &PhaseInstance) -> Result<PhaseEstimate> {
        let dist = cemm_on_continuous_phase(oracle, self.n)?;
        let y = sample_outcome(&dist, &mut self.rng);
        PhaseEstimate::new(y as f64 / self.n as f64, self.n)
    }
}

/// PD solver that runs an estimator on `U_y` and rounds to the nearest `y/N`.
#[derive(Debug, Clone)]
pub struct RoundingReduction<E> {
    estimator: E,
    n: usize,
    metric: DistanceMetric,
}

/// Wraps an `ε`-estimator as a `PD_N` solver with `N = ⌊1/(2ε)⌋`.
pub fn reduction_estimator_to_pd<E: PhaseEstimator>(estimator: E, epsilon: f64) -> Result<RoundingReduction<E>> {
    let n = grid_size_for_epsilon(epsilon)?;
    Ok(RoundingReduction { estimator, n, metric: DistanceMetric::Circular })
}

impl<E: PhaseEstimator> RoundingReduction<E> {
    /// Rounds with the literal absolute-difference metric instead of the circular one.
    pub fn with_metric(mut self, metric: DistanceMetric) -> Self {
        self.metric = metric;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn estimator_mut(&mut self) -> &mut E {
        &mut self.estimator
    }

    /// Guess for the hidden `y` given oracle access to `U_y`.
    pub fn solve(&mut self, family: &PhaseOracleFamily, y: usize) -> Result<usize> {
        if family.n() != self.n {
            return Err(PhaseLabError::Shape(format!("reduction decides n = {}, family has {}", self.n, family.n())));
        }
        if y >= self.n {
            return Err(PhaseLabError::Index { index: y, dim: self.n });
        }
        let inst = PhaseInstance::new(y as f64 / self.n as f64, family.eigenstate().to_vec())?;
        let est = self.estimator.estimate(&inst)?;
        Ok(round_to_grid_with(est.theta_hat, self.n, self.metric))
    }

    /// Empirical `Pr[y' = y]` with `y` uniform, over `trials` draws.
    pub fn success_rate<R: Rng + ?Sized>(
        &mut self,
        family: &PhaseOracleFamily,
        trials: usize,
        rng: &mut R,
    ) -> Result<f64> {
        if trials == 0 {
            return Err(PhaseLabError::Domain("need at least one trial".into()));
        }
        let mut hits = 0usize;
        for _ in 0..trials {
            let y = rng.random_range(0..self.n);
            if self.solve(family, y)? == y {
                hits += 1;
            }
        }
        Ok(hits as f64 / trials as f64)
    }
}

/// `n^{-1/2} Σ_y |y⟩_O |y⟩_C`.
#[derive(Debug, Clone, PartialEq)]
pub struct EprPair {
    pub n: usize,
    pub state: StateVector,
}

fn epr_layout(n: usize) -> Result<RegisterLayout> {
    RegisterLayout::new([(labels::OUTPUT, n), (labels::COUNTER, n)])
}

/// `n^{-1/2} Σ_y |−ŷ⟩_O |ŷ⟩_C`, built from Fourier states.
pub fn epr_fourier_form(n: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(PhaseLabError::Domain("n must be at least 1".into()));
    }
    let s = 1.0 / (n as f64).sqrt();
    let mut acc = vec![ZERO; n * n];
    for y in 0..n {
        let term =
            conjugate_fourier_state_on(labels::OUTPUT, n, y)?.tensor(&fourier_state_on(labels::COUNTER, n, y)?)?;
        for (a, t) in acc.iter_mut().zip(term.amplitudes()) {
            *a += t * s;
        }
    }
    StateVector::new(epr_layout(n)?, acc)
}

/// Largest entrywise gap between the computational and Fourier forms.
pub fn epr_deviation(n: usize) -> Result<f64> {
    let pair = computational_epr(n)?;
    pair.max_abs_diff(&epr_fourier_form(n)?)
}

fn computational_epr(n: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(PhaseLabError::Domain("n must be at least 1".into()));
    }
    let s = 1.0 / (n as f64).sqrt();
    let mut amps = vec![ZERO; n * n];
    for y in 0..n {
        amps[y * n + y] = Complex::new(s, 0.0);
    }
    StateVector::new(epr_layout(n)?, amps)
}

/// Builds the pair and checks it against its Fourier form within 1e-10.
pub fn epr_state(n: usize) -> Result<EprPair> {
    let state = computational_epr(n)?;
    let dev = state.max_abs_diff(&epr_fourier_form(n)?)?;
    if dev > tol::AMPLITUDE {
        return Err(PhaseLabError::Domain(format!("Fourier form deviates by {dev:e}")));
    }
    Ok(EprPair { n, state })
}
