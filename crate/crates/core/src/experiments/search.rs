//! Local search for high-success query algorithms.
//!
//! The purified success probability is a convex quadratic in any single step
//! `A_i` with the others fixed: `f(A) = ||P L (A ⊗ I_C) R||²`, where `R` is the
//! state entering slot `i`, `L` the rest of the circuit, and `P` the projector
//! onto `O = C`. Replacing `A` by the polar factor of the gradient
//! `G = Σ_c (L† P ψ)_c R_c†` maximizes the linearization, and convexity makes
//! every such update non-decreasing.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{PhaseLabError, Result};
use crate::linalg::{apply_to_registers, haar_random_unitary_with, Complex, StateVector, UnitaryMatrix, ZERO};
use crate::oracles::{labels, PhaseOracleFamily, QueryKind};
use crate::purified::{purified_initial_state, success_probability_purified, QueryAlgorithm, Step};

const COHERENT_TARGETS: [&str; 3] = [labels::CONTROL, labels::WORK, labels::COUNTER];

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best_success: f64,
    pub best_algorithm: QueryAlgorithm,
    /// Success probability before each update, in iteration order.
    pub history: Vec<f64>,
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub struct SearchSettings {
    pub iterations: usize,
    /// Fresh Haar start after this many updates; ignored when starting from a
    /// given algorithm.
    pub restart_every: usize,
    pub seed: u64,
}

impl SearchSettings {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self { iterations, restart_every: 50, seed }
    }
}

struct Oracles {
    forward: HashMap<i64, UnitaryMatrix>,
    backward: HashMap<i64, UnitaryMatrix>,
}

impl Oracles {
    fn new(family: &PhaseOracleFamily, kinds: &[QueryKind]) -> Self {
        let n = family.n() as i64;
        let mut forward = HashMap::new();
        let mut backward = HashMap::new();
        for k in kinds {
            let m = k.exponent().rem_euclid(n);
            forward.entry(m).or_insert_with(|| family.coherent_controlled_u(QueryKind::Power(m)));
            backward.entry(m).or_insert_with(|| family.coherent_controlled_u(QueryKind::Power(m)).adjoint());
        }
        Self { forward, backward }
    }
}

fn exponent(kind: QueryKind, n: usize) -> i64 {
    kind.exponent().rem_euclid(n as i64)
}

/// States entering each slot (`entering[i]` is what `A_i` acts on) and the final state.
fn forward_pass(alg: &QueryAlgorithm, oracles: &Oracles) -> Result<(Vec<StateVector>, StateVector)> {
    let n = alg.n();
    let mut entering = Vec::with_capacity(alg.steps().len());
    let mut state = purified_initial_state(alg)?;
    for (i, step) in alg.steps().iter().enumerate() {
        if i > 0 {
            let m = exponent(alg.kinds()[i - 1], n);
            state = apply_to_registers(&state, &oracles.forward[&m], &COHERENT_TARGETS)?;
        }
        entering.push(state.clone());
        state = step.apply(&state)?;
    }
    Ok((entering, state))
}

fn project_on_agreement(state: &StateVector) -> StateVector {
    let layout = state.layout();
    let po = layout.position(labels::OUTPUT).expect("output register");
    let pc = layout.position(labels::COUNTER).expect("counter register");
    let (so, sc) = (layout.stride(po), layout.stride(pc));
    let (no, nc) = (layout.registers()[po].dim, layout.registers()[pc].dim);
    let amps = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| if (i / so) % no == (i / sc) % nc { *a } else { ZERO })
        .collect();
    StateVector::unnormalized(layout.clone(), amps).expect("same layout")
}

/// Polar factor `U V†` of `G = U Σ V†`.
fn polar_unitary(dim: usize, g: &[Complex]) -> Result<UnitaryMatrix> {
    let m = DMatrix::<Complex>::from_row_slice(dim, dim, g);
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(PhaseLabError::Domain("SVD did not converge".into())),
    };
    let p = u * v_t;
    let entries: Vec<Complex> = (0..dim).flat_map(|r| (0..dim).map(move |c| (r, c))).map(|(r, c)| p[(r, c)]).collect();
    UnitaryMatrix::new(dim, entries)
}

/// One ascent step on slot `i`. Returns the success probability before the update.
fn improve_slot(alg: &mut QueryAlgorithm, oracles: &Oracles, slot: usize) -> Result<f64> {
    let n = alg.n();
    let (entering, final_state) = forward_pass(alg, oracles)?;
    let before = success_probability_purified(&final_state)?;

    let mut chi = project_on_agreement(&final_state);
    for k in (slot + 1..alg.steps().len()).rev() {
        chi = alg.steps()[k].apply_adjoint(&chi)?;
        let m = exponent(alg.kinds()[k - 1], n);
        chi = apply_to_registers(&chi, &oracles.backward[&m], &COHERENT_TARGETS)?;
    }

    // Steps are global on A; the counter is the last, fastest-varying register.
    let dim_a = alg.layout().total_dim();
    let r = entering[slot].amplitudes();
    let x = chi.amplitudes();
    let mut g = vec![ZERO; dim_a * dim_a];
    for a in 0..dim_a {
        let xa = &x[a * n..(a + 1) * n];
        for b in 0..dim_a {
            let rb = &r[b * n..(b + 1) * n];
            g[a * dim_a + b] = xa.iter().zip(rb).map(|(p, q)| p * q.conj()).sum();
        }
    }
    let next = polar_unitary(dim_a, &g)?;
    *alg = alg.with_step(slot, Step::global(alg.layout(), next))?;
    Ok(before)
}

fn evaluate(alg: &QueryAlgorithm, oracles: &Oracles) -> Result<f64> {
    success_probability_purified(&forward_pass(alg, oracles)?.1)
}

/// Greedy slot-wise ascent over `q`-query algorithms on the family.
///
/// Without `start`, runs repeated Haar restarts; with `start`, a single ascent
/// from the densified start algorithm. Slots are visited cyclically.
pub fn adversarial_search(
    family: &PhaseOracleFamily,
    q: usize,
    settings: &SearchSettings,
    start: Option<&QueryAlgorithm>,
) -> Result<SearchOutcome> {
    let n = family.n();
    let kinds = vec![QueryKind::Forward; q];
    let layout = QueryAlgorithm::standard_layout(n, family.work_dim())?;
    let oracles = Oracles::new(family, &kinds);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let restart_every = settings.restart_every.max(1);

    let fresh = |rng: &mut ChaCha8Rng| -> Result<QueryAlgorithm> {
        let dim = layout.total_dim();
        let steps = (0..=q)
            .map(|_| Ok(Step::global(&layout, haar_random_unitary_with(dim, rng)?)))
            .collect::<Result<Vec<_>>>()?;
        QueryAlgorithm::new(n, layout.clone(), steps, kinds.clone())
    };

    let mut current = match start {
        Some(a) => {
            if a.queries() != q || a.n() != n {
                return Err(PhaseLabError::Shape("start algorithm does not match (n, q)".into()));
            }
            a.densified()?
        }
        None => fresh(&mut rng)?,
    };
    let mut best_success = f64::NEG_INFINITY;
    let mut best_algorithm = current.clone();
    let mut history = Vec::with_capacity(settings.iterations);
    let mut restarts = 0usize;
    let mut since_restart = 0usize;

    for _ in 0..settings.iterations {
        if start.is_none() && since_restart == restart_every {
            current = fresh(&mut rng)?;
            restarts += 1;
            since_restart = 0;
        }
        let snapshot = current.clone();
        let slot = since_restart % (q + 1);
        let before = improve_slot(&mut current, &oracles, slot)?;
        history.push(before);
        if before > best_success {
            best_success = before;
            best_algorithm = snapshot;
        }
        since_restart += 1;
    }
    let last = evaluate(&current, &oracles)?;
    if last > best_success {
        best_success = last;
        best_algorithm = current;
    }
    Ok(SearchOutcome { best_success, best_algorithm, history, restarts })
}
