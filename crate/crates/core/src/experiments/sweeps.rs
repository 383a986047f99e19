use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::search::{adversarial_search, SearchSettings};
use super::{
    derive_seed, ExperimentConfig, ExperimentError, ExperimentKind, ExperimentResult, ResultRow, BOUND_SLACK,
    LEAKAGE_TOLERANCE,
};
use crate::algorithms::{
    build_truncated_optimal, cemm_on_continuous_phase, epr_deviation, epr_state, phase_distance,
    reduction_estimator_to_pd, DistanceMetric, SyntheticEstimator,
};
use crate::oracles::{PhaseInstance, PhaseOracleFamily, QueryKind};
use crate::purified::{
    reachable_counter_values, run_purified_transcript, success_probability_average, success_probability_purified,
    QueryAlgorithm, RunTranscript,
};

const TAG_HAAR: u64 = 1;
const TAG_FORWARD: u64 = 2;
const TAG_MIXED: u64 = 3;
const TAG_SEARCH: u64 = 4;
const TAG_REDUCTION: u64 = 5;

/// Work dimension of the standard eigenstate family.
const WORK_DIM: usize = 2;

fn kind_rank(kind: &str) -> usize {
    match kind {
        "optimal" => 0,
        "haar" => 1,
        "counter-forward" => 2,
        "counter-mixed" => 3,
        "adversarial" => 4,
        "cemm-window" => 5,
        "cemm-nearest" => 6,
        "cemm-worst" => 7,
        "truncated" => 8,
        "epr" => 9,
        _ => 10,
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn bound(n: usize, q: usize) -> f64 {
    (q + 1) as f64 / n as f64
}

fn finish(cfg: &ExperimentConfig, chunks: Vec<Vec<ResultRow>>) -> ExperimentResult {
    let mut rows: Vec<ResultRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.n, a.q, kind_rank(&a.kind), &a.kind, a.trial).cmp(&(b.n, b.q, kind_rank(&b.kind), &b.kind, b.trial))
    });
    ExperimentResult::new(cfg.clone(), rows)
}

/// First row, in output order, that breaks the bound or the leakage budget.
fn check_rows(result: &ExperimentResult) -> Result<(), ExperimentError> {
    for r in &result.rows {
        if r.gap.is_nan() || r.gap < -BOUND_SLACK {
            return Err(ExperimentError::BoundViolation {
                kind: r.kind.clone(),
                n: r.n,
                q: r.q,
                trial: r.trial,
                seed: r.seed,
                observed: r.observed_probability,
                bound: r.bound_value,
            });
        }
        if r.max_leakage.is_nan() || r.max_leakage > LEAKAGE_TOLERANCE {
            return Err(ExperimentError::LeakageViolation {
                kind: r.kind.clone(),
                n: r.n,
                q: r.q,
                trial: r.trial,
                seed: r.seed,
                leakage: r.max_leakage,
            });
        }
    }
    Ok(())
}

fn validated(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<(), ExperimentError> {
    if cfg.kind != kind {
        return Err(ExperimentError::Config(format!("expected kind {kind}, got {}", cfg.kind)));
    }
    cfg.validate()
}

/// Largest leakage beyond `j` over the first `q + 1` counter snapshots.
fn max_leakage_upto(t: &RunTranscript, q: usize) -> f64 {
    (0..=q).map(|j| t.leakage_after(j)).fold(0.0, f64::max)
}

enum SweepTask {
    Optimal { n: usize, q: usize },
    Haar { n: usize, trial: usize, qs: Vec<usize> },
}

/// Truncated-optimal and Haar-random algorithms on every `(n, q)`.
///
/// Each Haar trial draws one algorithm with `max q` queries; its prefixes are
/// the Haar-random algorithms for the smaller `q`.
pub fn run_bound_sweep(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    validated(cfg, ExperimentKind::BoundSweep)?;
    let mut tasks = Vec::new();
    for &n in &cfg.n_values {
        let qs = cfg.q_values_for(n);
        if qs.is_empty() {
            continue;
        }
        tasks.extend(qs.iter().map(|&q| SweepTask::Optimal { n, q }));
        tasks.extend((0..cfg.trials).map(|trial| SweepTask::Haar { n, trial, qs: qs.clone() }));
    }
    let chunks = tasks
        .par_iter()
        .map(|task| -> Result<Vec<ResultRow>, ExperimentError> {
            let start = Instant::now();
            match task {
                &SweepTask::Optimal { n, q } => {
                    let family = PhaseOracleFamily::standard(n)?;
                    let alg = build_truncated_optimal(n, q)?;
                    let t = run_purified_transcript(&alg, &family)?;
                    Ok(vec![ResultRow::new(n, q, "optimal", 0, cfg.seed)
                        .with_probability(t.prefix_success[q], bound(n, q))
                        .with_leakage(max_leakage_upto(&t, q))
                        .with_wall_time(elapsed_ms(start))])
                }
                SweepTask::Haar { n, trial, qs } => {
                    let (n, trial) = (*n, *trial);
                    let seed = derive_seed(cfg.seed, &[TAG_HAAR, n as u64, trial as u64]);
                    let q_max = *qs.last().expect("non-empty");
                    let family = PhaseOracleFamily::standard(n)?;
                    let alg = QueryAlgorithm::haar_random(n, WORK_DIM, vec![QueryKind::Forward; q_max], seed)?;
                    let t = run_purified_transcript(&alg, &family)?;
                    let ms = elapsed_ms(start);
                    Ok(qs
                        .iter()
                        .map(|&q| {
                            ResultRow::new(n, q, "haar", trial, seed)
                                .with_probability(t.prefix_success[q], bound(n, q))
                                .with_leakage(max_leakage_upto(&t, q))
                                .with_wall_time(ms)
                        })
                        .collect())
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = finish(cfg, chunks);
    check_rows(&result)?;
    Ok(result)
}

const SCHEDULE_KINDS: [QueryKind; 5] =
    [QueryKind::Forward, QueryKind::Inverse, QueryKind::Power(2), QueryKind::Power(3), QueryKind::Power(5)];

/// Uniform draw from forward, inverse and `power(m)` for `m ∈ {2, 3, 5}`.
pub fn random_schedule<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<QueryKind> {
    (0..len).map(|_| SCHEDULE_KINDS[rng.random_range(0..SCHEDULE_KINDS.len())]).collect()
}

fn mixed_rows(n: usize, trial: usize, qs: &[usize], seed: u64) -> Result<Vec<ResultRow>, ExperimentError> {
    let start = Instant::now();
    let q_max = *qs.last().expect("non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = random_schedule(q_max, &mut rng);
    let family = PhaseOracleFamily::standard(n)?;
    let layout = QueryAlgorithm::standard_layout(n, WORK_DIM)?;
    let alg = QueryAlgorithm::haar_random_with(n, layout, kinds.clone(), &mut rng)?;
    let t = run_purified_transcript(&alg, &family)?;
    let reachable: Vec<BTreeSet<usize>> = (0..=q_max).map(|j| reachable_counter_values(&kinds[..j], n)).collect();
    let ms = elapsed_ms(start);
    Ok(qs
        .iter()
        .map(|&q| {
            let leak = (0..=q).map(|j| t.leakage_outside_after(j, &reachable[j])).fold(0.0, f64::max);
            ResultRow::new(n, q, "counter-mixed", trial, seed)
                .with_probability(t.prefix_success[q], reachable[q].len() as f64 / n as f64)
                .with_leakage(leak)
                .with_wall_time(ms)
        })
        .collect())
}

/// Counter leakage under forward schedules and random mixed schedules.
///
/// Mixed rows are bounded by `|R|/n`, where `R` is the reachable counter set.
pub fn run_counter_scan(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    validated(cfg, ExperimentKind::CounterScan)?;
    let mut tasks = Vec::new();
    for &n in &cfg.n_values {
        let qs = cfg.q_values_for(n);
        if qs.is_empty() {
            continue;
        }
        for trial in 0..cfg.trials {
            tasks.push((n, trial, qs.clone(), false));
            tasks.push((n, trial, qs.clone(), true));
        }
    }
    let chunks = tasks
        .par_iter()
        .map(|(n, trial, qs, mixed)| -> Result<Vec<ResultRow>, ExperimentError> {
            let (n, trial) = (*n, *trial);
            if *mixed {
                return mixed_rows(n, trial, qs, derive_seed(cfg.seed, &[TAG_MIXED, n as u64, trial as u64]));
            }
            let start = Instant::now();
            let seed = derive_seed(cfg.seed, &[TAG_FORWARD, n as u64, trial as u64]);
            let q_max = *qs.last().expect("non-empty");
            let family = PhaseOracleFamily::standard(n)?;
            let alg = QueryAlgorithm::haar_random(n, WORK_DIM, vec![QueryKind::Forward; q_max], seed)?;
            let t = run_purified_transcript(&alg, &family)?;
            let ms = elapsed_ms(start);
            Ok(qs
                .iter()
                .map(|&q| {
                    ResultRow::new(n, q, "counter-forward", trial, seed)
                        .with_probability(t.prefix_success[q], bound(n, q))
                        .with_leakage(max_leakage_upto(&t, q))
                        .with_wall_time(ms)
                })
                .collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = finish(cfg, chunks);
    check_rows(&result)?;
    Ok(result)
}

/// Slot-wise ascent per `(n, q)`, with `trials` iterations.
pub fn run_adversarial_search(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    validated(cfg, ExperimentKind::RandomStress)?;
    let tasks: Vec<(usize, usize)> =
        cfg.n_values.iter().flat_map(|&n| cfg.q_values_for(n).into_iter().map(move |q| (n, q))).collect();
    let chunks = tasks
        .par_iter()
        .map(|&(n, q)| -> Result<Vec<ResultRow>, ExperimentError> {
            let start = Instant::now();
            let seed = derive_seed(cfg.seed, &[TAG_SEARCH, n as u64, q as u64]);
            let family = PhaseOracleFamily::standard(n)?;
            let out = adversarial_search(&family, q, &SearchSettings::new(cfg.trials, seed), None)?;
            let t = run_purified_transcript(&out.best_algorithm, &family)?;
            Ok(vec![ResultRow::new(n, q, "adversarial", 0, seed)
                .with_probability(out.best_success, bound(n, q))
                .with_leakage(max_leakage_upto(&t, q))
                .with_wall_time(elapsed_ms(start))])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = finish(cfg, chunks);
    check_rows(&result)?;
    Ok(result)
}

/// Probability that the circularly rounded outcome lies within `1/(2n)` of `θ`.
pub fn window_probability(dist: &[f64], theta: f64) -> f64 {
    let n = dist.len();
    let radius = 0.5 / n as f64 + 1e-12;
    dist.iter()
        .enumerate()
        .filter(|(y, _)| phase_distance(*y as f64 / n as f64, theta, DistanceMetric::Circular) <= radius)
        .map(|(_, p)| p)
        .sum()
}

/// Exact CEMM outcome statistics over a grid of continuous phases.
///
/// Rows: `cemm-window` and `cemm-nearest` per `(n, θ)` with `trial` the grid
/// index, one `cemm-worst` per `n`, and `truncated` rows for configured `q`.
pub fn run_cemm_curve(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    validated(cfg, ExperimentKind::CemmCurve)?;
    let grid = cfg.theta_grid.clone().unwrap_or_default();
    let chunks = cfg
        .n_values
        .par_iter()
        .map(|&n| -> Result<Vec<ResultRow>, ExperimentError> {
            let mut rows = Vec::new();
            let mut worst: Option<(usize, f64, f64)> = None;
            for (i, &theta) in grid.iter().enumerate() {
                let start = Instant::now();
                let dist = cemm_on_continuous_phase(&PhaseInstance::standard(theta)?, n)?;
                let window = window_probability(&dist, theta);
                let nearest = dist.iter().copied().fold(0.0, f64::max);
                let ms = elapsed_ms(start);
                rows.push(
                    ResultRow::new(n, n - 1, "cemm-window", i, cfg.seed)
                        .with_probability(window, 1.0)
                        .with_wall_time(ms),
                );
                rows.push(
                    ResultRow::new(n, n - 1, "cemm-nearest", i, cfg.seed)
                        .with_probability(nearest, 1.0)
                        .with_wall_time(ms),
                );
                if worst.is_none_or(|(_, w, _)| window < w) {
                    worst = Some((i, window, ms));
                }
            }
            if let Some((i, w, ms)) = worst {
                rows.push(
                    ResultRow::new(n, n - 1, "cemm-worst", i, cfg.seed).with_probability(w, 1.0).with_wall_time(ms),
                );
            }
            if !cfg.q_values.is_empty() {
                let family = PhaseOracleFamily::standard(n)?;
                for q in cfg.q_values_for(n) {
                    let start = Instant::now();
                    let p = success_probability_average(&build_truncated_optimal(n, q)?, &family)?;
                    rows.push(
                        ResultRow::new(n, q, "truncated", 0, cfg.seed)
                            .with_probability(p, bound(n, q))
                            .with_wall_time(elapsed_ms(start)),
                    );
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = finish(cfg, chunks);
    check_rows(&result)?;
    Ok(result)
}

/// EPR basis identity per `n`; `max_leakage` carries the entrywise deviation
/// and `observed_probability` the output/counter agreement probability.
pub fn run_epr_check(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    validated(cfg, ExperimentKind::EprCheck)?;
    let chunks = cfg
        .n_values
        .par_iter()
        .map(|&n| -> Result<Vec<ResultRow>, ExperimentError> {
            let start = Instant::now();
            let deviation = epr_deviation(n)?;
            if deviation > LEAKAGE_TOLERANCE {
                return Err(ExperimentError::CheckFailed(format!("EPR deviation {deviation:e} at n={n}")));
            }
            let agreement = success_probability_purified(&epr_state(n)?.state)?;
            Ok(vec![ResultRow::new(n, n - 1, "epr", 0, cfg.seed)
                .with_probability(agreement, 1.0)
                .with_leakage(deviation)
                .with_wall_time(elapsed_ms(start))])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = finish(cfg, chunks);
    check_rows(&result)?;
    Ok(result)
}

/// Estimator accuracy used for grid size `N`: `1/(2N+1)`, which maps back to `N`.
pub fn epsilon_for_grid(n: usize) -> f64 {
    1.0 / (2 * n + 1) as f64
}

/// Rounding reduction driven by a synthetic estimator, per `(N, p)`.
///
/// `trials` samples per cell; the row kind names `p` and `trial` is its index.
/// A cell fails when the success rate falls below `p − 2·SE`.
pub fn run_reduction_check(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    validated(cfg, ExperimentKind::ReductionCheck)?;
    let ps = cfg.p_values.clone().unwrap_or_default();
    let tasks: Vec<(usize, usize, f64)> =
        cfg.n_values.iter().flat_map(|&n| ps.iter().enumerate().map(move |(i, &p)| (n, i, p))).collect();
    let chunks = tasks
        .par_iter()
        .map(|&(n, i, p)| -> Result<Vec<ResultRow>, ExperimentError> {
            let start = Instant::now();
            let seed = derive_seed(cfg.seed, &[TAG_REDUCTION, n as u64, i as u64]);
            let eps = epsilon_for_grid(n);
            let estimator = SyntheticEstimator::new(p, 0.999 * eps, seed)?;
            let mut reduction = reduction_estimator_to_pd(estimator, eps)?;
            let family = PhaseOracleFamily::standard(n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix_stream(seed));
            let rate = reduction.success_rate(&family, cfg.trials, &mut rng)?;
            let se = (p * (1.0 - p) / cfg.trials as f64).sqrt();
            if rate < p - 2.0 * se {
                return Err(ExperimentError::CheckFailed(format!(
                    "reduction success {rate} below {p} - 2 SE at N={n}, seed={seed}"
                )));
            }
            Ok(vec![ResultRow::new(n, 0, format!("reduction-p{p}"), i, seed)
                .with_probability(rate, 1.0)
                .with_wall_time(elapsed_ms(start))])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let result = finish(cfg, chunks);
    check_rows(&result)?;
    Ok(result)
}

fn splitmix_stream(seed: u64) -> u64 {
    super::splitmix64(seed ^ 0xA5A5_A5A5_A5A5_A5A5)
}
