//! Query-algorithm simulation in the fixed-oracle view and in the purified view,
//! where the oracle index lives coherently in a counter register `C`.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::error::{PhaseLabError, Result};
use crate::fourier::fourier_weights;
use crate::linalg::{
    apply_to_registers, haar_random_unitary_with, projection_norm_sq, Complex, RegisterLayout, StateVector,
    UnitaryMatrix, ZERO,
};
use crate::oracles::{labels, ControlledOracle, FamilyMember, PhaseOracleFamily, QueryKind};

/// One interleaving unitary. It acts on `targets` and as identity on every other
/// algorithm register, so it is a unitary on the whole algorithm space.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    targets: Vec<String>,
    unitary: UnitaryMatrix,
}

impl Step {
    pub fn new<S: Into<String>>(targets: impl IntoIterator<Item = S>, unitary: UnitaryMatrix) -> Self {
        Self { targets: targets.into_iter().map(Into::into).collect(), unitary }
    }

    /// A step acting on every register of `layout`.
    pub fn global(layout: &RegisterLayout, unitary: UnitaryMatrix) -> Self {
        Self::new(layout.registers().iter().map(|r| r.label.clone()), unitary)
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn unitary(&self) -> &UnitaryMatrix {
        &self.unitary
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        let t: Vec<&str> = self.targets.iter().map(String::as_str).collect();
        apply_to_registers(state, &self.unitary, &t)
    }

    pub fn apply_adjoint(&self, state: &StateVector) -> Result<StateVector> {
        let t: Vec<&str> = self.targets.iter().map(String::as_str).collect();
        apply_to_registers(state, &self.unitary.adjoint(), &t)
    }
}

/// A `q`-query algorithm: steps `A_0..A_q` on the algorithm registers and one
/// query kind per oracle call. The initial state is `|0…0⟩`; each query applies
/// the controlled oracle to the (`B`, `W`) registers.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAlgorithm {
    n: usize,
    layout: RegisterLayout,
    steps: Vec<Step>,
    kinds: Vec<QueryKind>,
}

impl QueryAlgorithm {
    pub fn new(n: usize, layout: RegisterLayout, steps: Vec<Step>, kinds: Vec<QueryKind>) -> Result<Self> {
        if n == 0 {
            return Err(PhaseLabError::Domain("n must be at least 1".into()));
        }
        if layout.contains(labels::COUNTER) {
            return Err(PhaseLabError::Shape("register C is reserved for the purifying counter".into()));
        }
        if layout.dim_of(labels::OUTPUT)? != n {
            return Err(PhaseLabError::Shape(format!("output register must have dimension {n}")));
        }
        if layout.dim_of(labels::CONTROL)? != 2 {
            return Err(PhaseLabError::Shape("control register must have dimension 2".into()));
        }
        layout.dim_of(labels::WORK)?;
        if steps.len() != kinds.len() + 1 {
            return Err(PhaseLabError::Shape(format!(
                "{} queries need {} steps, got {}",
                kinds.len(),
                kinds.len() + 1,
                steps.len()
            )));
        }
        for step in &steps {
            let mut dim = 1usize;
            for t in &step.targets {
                dim *= layout.dim_of(t)?;
            }
            if dim != step.unitary.dim() {
                return Err(PhaseLabError::Shape(format!(
                    "step on {:?} has dimension {}, registers have {dim}",
                    step.targets,
                    step.unitary.dim()
                )));
            }
        }
        Ok(Self { n, layout, steps, kinds })
    }

    /// `[O: n, B: 2, W: work_dim]`.
    pub fn standard_layout(n: usize, work_dim: usize) -> Result<RegisterLayout> {
        RegisterLayout::new([(labels::OUTPUT, n), (labels::CONTROL, 2), (labels::WORK, work_dim)])
    }

    /// Every step an independent Haar unitary on the whole layout.
    pub fn haar_random_with<R: Rng + ?Sized>(
        n: usize,
        layout: RegisterLayout,
        kinds: Vec<QueryKind>,
        rng: &mut R,
    ) -> Result<Self> {
        let dim = layout.total_dim();
        let steps = (0..=kinds.len())
            .map(|_| Ok(Step::global(&layout, haar_random_unitary_with(dim, rng)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, layout, steps, kinds)
    }

    pub fn haar_random(n: usize, work_dim: usize, kinds: Vec<QueryKind>, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Self::haar_random_with(n, Self::standard_layout(n, work_dim)?, kinds, &mut rng)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn queries(&self) -> usize {
        self.kinds.len()
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn kinds(&self) -> &[QueryKind] {
        &self.kinds
    }

    pub fn work_dim(&self) -> usize {
        self.layout.dim_of(labels::WORK).expect("validated at construction")
    }

    /// Replaces step `i`.
    pub fn with_step(&self, i: usize, step: Step) -> Result<Self> {
        if i >= self.steps.len() {
            return Err(PhaseLabError::Index { index: i, dim: self.steps.len() });
        }
        let mut steps = self.steps.clone();
        steps[i] = step;
        Self::new(self.n, self.layout.clone(), steps, self.kinds.clone())
    }

    /// Same algorithm with every step expanded to a dense matrix on the full layout.
    pub fn densified(&self) -> Result<Self> {
        let dim = self.layout.total_dim();
        let steps = self
            .steps
            .iter()
            .map(|s| {
                let mut entries = vec![ZERO; dim * dim];
                for c in 0..dim {
                    let col = s.apply(&StateVector::basis(self.layout.clone(), c)?)?;
                    for (r, z) in col.amplitudes().iter().enumerate() {
                        entries[r * dim + c] = *z;
                    }
                }
                Ok(Step::global(&self.layout, UnitaryMatrix::from_raw(dim, entries)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.n, self.layout.clone(), steps, self.kinds.clone())
    }

    fn check_family(&self, family: &PhaseOracleFamily) -> Result<()> {
        if family.n() != self.n {
            return Err(PhaseLabError::Shape(format!(
                "algorithm built for n = {}, family has n = {}",
                self.n,
                family.n()
            )));
        }
        self.check_work_dim(family.work_dim())
    }

    fn check_work_dim(&self, d: usize) -> Result<()> {
        if d != self.work_dim() {
            return Err(PhaseLabError::Shape(format!(
                "oracle acts on dimension {d}, work register has {}",
                self.work_dim()
            )));
        }
        Ok(())
    }
}

const ORACLE_TARGETS: [&str; 2] = [labels::CONTROL, labels::WORK];
const COHERENT_TARGETS: [&str; 3] = [labels::CONTROL, labels::WORK, labels::COUNTER];

fn query_cache<O: ControlledOracle + ?Sized>(
    oracle: &O,
    kinds: &[QueryKind],
) -> Result<HashMap<QueryKind, UnitaryMatrix>> {
    let mut cache = HashMap::new();
    for &k in kinds {
        if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(k) {
            e.insert(oracle.controlled_query(k)?);
        }
    }
    Ok(cache)
}

/// Runs the algorithm against an arbitrary controlled oracle and returns the
/// states right after each query (before the following step), then the final state.
pub fn run_with_oracle_snapshots<O: ControlledOracle + ?Sized>(
    alg: &QueryAlgorithm,
    oracle: &O,
) -> Result<(Vec<StateVector>, StateVector)> {
    alg.check_work_dim(oracle.work_dim())?;
    let cache = query_cache(oracle, &alg.kinds)?;
    let mut state = alg.steps[0].apply(&StateVector::zero(alg.layout.clone()))?;
    let mut snapshots = Vec::with_capacity(alg.queries());
    for (kind, step) in alg.kinds.iter().zip(&alg.steps[1..]) {
        state = apply_to_registers(&state, &cache[kind], &ORACLE_TARGETS)?;
        snapshots.push(state.clone());
        state = step.apply(&state)?;
    }
    Ok((snapshots, state))
}

pub fn run_with_oracle<O: ControlledOracle + ?Sized>(alg: &QueryAlgorithm, oracle: &O) -> Result<StateVector> {
    alg.check_work_dim(oracle.work_dim())?;
    let cache = query_cache(oracle, &alg.kinds)?;
    let mut state = alg.steps[0].apply(&StateVector::zero(alg.layout.clone()))?;
    for (kind, step) in alg.kinds.iter().zip(&alg.steps[1..]) {
        state = apply_to_registers(&state, &cache[kind], &ORACLE_TARGETS)?;
        state = step.apply(&state)?;
    }
    Ok(state)
}

/// `A_q c-U_y A_{q-1} … c-U_y A_0 |0…0⟩`.
pub fn run_fixed_y(alg: &QueryAlgorithm, family: &PhaseOracleFamily, y: usize) -> Result<StateVector> {
    alg.check_family(family)?;
    if y >= family.n() {
        return Err(PhaseLabError::Index { index: y, dim: family.n() });
    }
    run_with_oracle(alg, &FamilyMember { family, y })
}

/// States right after each query of the fixed-y run.
pub fn run_fixed_y_snapshots(alg: &QueryAlgorithm, family: &PhaseOracleFamily, y: usize) -> Result<Vec<StateVector>> {
    alg.check_family(family)?;
    if y >= family.n() {
        return Err(PhaseLabError::Index { index: y, dim: family.n() });
    }
    Ok(run_with_oracle_snapshots(alg, &FamilyMember { family, y })?.0)
}

/// `|0…0⟩_A ⊗ |0̂⟩_C`.
pub fn purified_initial_state(alg: &QueryAlgorithm) -> Result<StateVector> {
    let n = alg.n;
    let counter = crate::fourier::fourier_state_on(labels::COUNTER, n, 0)?;
    StateVector::zero(alg.layout.clone()).tensor(&counter)
}

fn coherent_cache(family: &PhaseOracleFamily, kinds: &[QueryKind]) -> HashMap<i64, UnitaryMatrix> {
    let n = family.n() as i64;
    let mut cache = HashMap::new();
    for k in kinds {
        let m = k.exponent().rem_euclid(n);
        cache.entry(m).or_insert_with(|| family.coherent_controlled_u(QueryKind::Power(m)));
    }
    cache
}

/// Diagnostic record of a purified run.
#[derive(Debug, Clone)]
pub struct RunTranscript {
    pub n: usize,
    pub q: usize,
    /// Entry `j` holds the Fourier weights of `C` after `j` queries.
    pub counter_weights: Vec<Vec<f64>>,
    /// Entry `j` is the success probability of the `j`-query prefix
    /// `A_0, …, A_j` of the algorithm.
    pub prefix_success: Vec<f64>,
    pub final_state: StateVector,
}

impl RunTranscript {
    /// Weight outside `{0, …, j}` after `j` queries.
    pub fn leakage_after(&self, j: usize) -> f64 {
        self.counter_weights[j].iter().skip(j + 1).sum()
    }

    /// Weight after `j` queries outside the given allowed set.
    pub fn leakage_outside_after(&self, j: usize, allowed: &BTreeSet<usize>) -> f64 {
        self.counter_weights[j].iter().enumerate().filter(|(k, _)| !allowed.contains(k)).map(|(_, w)| w).sum()
    }
}

/// `A_q c-𝔘 … c-𝔘 A_0 |0…0⟩_A |0̂⟩_C`.
pub fn run_purified(alg: &QueryAlgorithm, family: &PhaseOracleFamily) -> Result<StateVector> {
    alg.check_family(family)?;
    let cache = coherent_cache(family, &alg.kinds);
    let n = family.n() as i64;
    let mut state = alg.steps[0].apply(&purified_initial_state(alg)?)?;
    for (kind, step) in alg.kinds.iter().zip(&alg.steps[1..]) {
        state = apply_to_registers(&state, &cache[&kind.exponent().rem_euclid(n)], &COHERENT_TARGETS)?;
        state = step.apply(&state)?;
    }
    Ok(state)
}

/// Purified run recording the counter spectrum after every query and the
/// success probability of every prefix algorithm.
pub fn run_purified_transcript(alg: &QueryAlgorithm, family: &PhaseOracleFamily) -> Result<RunTranscript> {
    alg.check_family(family)?;
    let cache = coherent_cache(family, &alg.kinds);
    let n = family.n() as i64;
    let mut state = purified_initial_state(alg)?;
    let mut counter_weights = vec![fourier_weights(&state, labels::COUNTER)?];
    state = alg.steps[0].apply(&state)?;
    let mut prefix_success = vec![success_probability_purified(&state)?];
    for (kind, step) in alg.kinds.iter().zip(&alg.steps[1..]) {
        state = apply_to_registers(&state, &cache[&kind.exponent().rem_euclid(n)], &COHERENT_TARGETS)?;
        counter_weights.push(fourier_weights(&state, labels::COUNTER)?);
        state = step.apply(&state)?;
        prefix_success.push(success_probability_purified(&state)?);
    }
    Ok(RunTranscript { n: alg.n, q: alg.queries(), counter_weights, prefix_success, final_state: state })
}

/// Fourier weight of `C` on indices above `budget`.
pub fn counter_leakage(state: &StateVector, budget: usize) -> Result<f64> {
    let w = fourier_weights(state, labels::COUNTER)?;
    Ok(w.iter().skip(budget.saturating_add(1)).sum())
}

/// Fourier weight of `C` outside `allowed`.
pub fn counter_leakage_outside(state: &StateVector, allowed: &BTreeSet<usize>) -> Result<f64> {
    let w = fourier_weights(state, labels::COUNTER)?;
    Ok(w.iter().enumerate().filter(|(k, _)| !allowed.contains(k)).map(|(_, p)| p).sum())
}

/// Counter values a query schedule can reach: every sub-sum of the exponents,
/// mod `n`. A query contributes its exponent on the `|1⟩|u⟩` branch and nothing
/// otherwise, so any subset of the queries may fire.
pub fn reachable_counter_values(kinds: &[QueryKind], n: usize) -> BTreeSet<usize> {
    let n_i = n as i64;
    let mut reach = BTreeSet::from([0usize]);
    for k in kinds {
        let m = k.exponent().rem_euclid(n_i) as usize;
        let shifted: Vec<usize> = reach.iter().map(|v| (v + m) % n).collect();
        reach.extend(shifted);
    }
    reach
}

/// `Σ_y ||Π_O^y ⊗ Π_C^y |ψ⟩||²`: probability that measuring `O` and `C` agrees.
pub fn success_probability_purified(state: &StateVector) -> Result<f64> {
    let layout = state.layout();
    let po = layout.position(labels::OUTPUT).ok_or_else(|| PhaseLabError::Label(labels::OUTPUT.into()))?;
    let pc = layout.position(labels::COUNTER).ok_or_else(|| PhaseLabError::Label(labels::COUNTER.into()))?;
    let (so, sc) = (layout.stride(po), layout.stride(pc));
    let (no, nc) = (layout.registers()[po].dim, layout.registers()[pc].dim);
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| (i / so) % no == (i / sc) % nc)
        .map(|(_, a)| a.norm_sqr())
        .sum())
}

/// `(1/n) Σ_y ||Π_O^y run_fixed_y(y)||²`.
pub fn success_probability_average(alg: &QueryAlgorithm, family: &PhaseOracleFamily) -> Result<f64> {
    let n = family.n();
    let mut total = 0.0;
    for y in 0..n {
        let s = run_fixed_y(alg, family, y)?;
        total += projection_norm_sq(&s, labels::OUTPUT, y)?;
    }
    Ok(total / n as f64)
}

/// Computational-basis distribution of the output register.
pub fn output_distribution(state: &StateVector) -> Result<Vec<f64>> {
    state.marginal(labels::OUTPUT)
}

/// Draws one outcome from a distribution. Demonstration output only; every
/// verification path uses exact probabilities.
pub fn sample_outcome<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, p) in probs.iter().enumerate() {
        if x < *p {
            return i;
        }
        x -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Amplitude of the purified state restricted to computational counter value `y`.
pub fn counter_slice(state: &StateVector, y: usize) -> Result<Vec<Complex>> {
    let layout = state.layout();
    let pc = layout.position(labels::COUNTER).ok_or_else(|| PhaseLabError::Label(labels::COUNTER.into()))?;
    let nc = layout.registers()[pc].dim;
    if y >= nc {
        return Err(PhaseLabError::Index { index: y, dim: nc });
    }
    let sc = layout.stride(pc);
    Ok(state.amplitudes().iter().enumerate().filter(|(i, _)| (i / sc) % nc == y).map(|(_, a)| *a).collect())
}
