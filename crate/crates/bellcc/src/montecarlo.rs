//! Round-by-round protocol simulation.
//!
//! Each round draws inputs, produces local ±1 values (strategy evaluations
//! or measurement outcomes), broadcasts e_p = a_p·y_p — one bit per party —
//! and scores the common guess Π_p e_p against the target. Randomness is
//! counter-seeded: round k uses ChaCha stream k of the master seed, so the
//! tally is independent of execution order and exactly reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::party_bit;
use crate::ccp::{ensemble_success, quantum_success, CcProblem};
use crate::error::{Error, Result};
use crate::inequalities::StrategyEnsemble;
use crate::qsim::{
    correlation_tensor, outcome_distribution, sample_outcomes, MeasurementSettings,
    OutcomeDistribution, PureState,
};

/// Everything observable about one protocol round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTrace {
    /// Joint setting index drawn from Q.
    pub x: usize,
    /// Uniform ±1 inputs, one per party.
    pub y: Vec<i8>,
    /// Local ±1 values (computed or measured).
    pub a: Vec<i8>,
    /// The n broadcast bits e_p = a_p·y_p — the round's entire transcript.
    pub broadcasts: Vec<i8>,
    /// Common guess Π_p e_p, a function of the broadcasts alone.
    pub guess: i8,
    /// Target value f = (Π_p y_p)·sgn g(x).
    pub target: i8,
    pub success: bool,
}

impl RoundTrace {
    fn score(x: usize, y: Vec<i8>, a: Vec<i8>, target: i8) -> Self {
        let broadcasts: Vec<i8> = a.iter().zip(&y).map(|(&ap, &yp)| ap * yp).collect();
        let guess: i8 = broadcasts.iter().product();
        Self {
            x,
            y,
            a,
            broadcasts,
            success: guess == target,
            guess,
            target,
        }
    }
}

/// Aggregate of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rounds: u64,
    pub successes: u64,
    pub empirical_rate: f64,
    /// Exact success probability of the simulated protocol.
    pub analytic_rate: f64,
    /// Binomial standard error √(p(1−p)/N) at the analytic rate.
    pub standard_error: f64,
    pub z_score: f64,
}

impl SimReport {
    fn from_tally(rounds: u64, successes: u64, analytic_rate: f64) -> Self {
        let empirical_rate = successes as f64 / rounds as f64;
        let standard_error = (analytic_rate * (1.0 - analytic_rate) / rounds as f64).sqrt();
        let z_score = if standard_error > 0.0 {
            (empirical_rate - analytic_rate) / standard_error
        } else if empirical_rate == analytic_rate {
            0.0
        } else {
            f64::INFINITY * (empirical_rate - analytic_rate).signum()
        };
        Self {
            rounds,
            successes,
            empirical_rate,
            analytic_rate,
            standard_error,
            z_score,
        }
    }
}

fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

/// Draws (x, y): x by inverse CDF over Q, then one fair ±1 per party.
pub fn sample_inputs<R: Rng + ?Sized>(problem: &CcProblem, rng: &mut R) -> (usize, Vec<i8>) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut x = 0;
    let last_support = problem
        .q()
        .iter()
        .rposition(|&q| q > 0.0)
        .expect("distribution has support");
    for (idx, &q) in problem.q().iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        acc += q;
        x = idx;
        if u < acc || idx == last_support {
            break;
        }
    }
    let y: Vec<i8> = (0..problem.n())
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    (x, y)
}

fn draw_member<'a, R: Rng + ?Sized>(
    ensemble: &'a StrategyEnsemble,
    rng: &mut R,
) -> &'a crate::inequalities::DeterministicStrategy {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let last = ensemble.members().len() - 1;
    for (k, &w) in ensemble.weights().iter().enumerate() {
        acc += w;
        if u < acc || k == last {
            return &ensemble.members()[k];
        }
    }
    unreachable!()
}

/// Runs the classical protocol: per round draw the shared-randomness member,
/// then the inputs, then score the broadcasts.
pub fn run_classical(
    problem: &CcProblem,
    ensemble: &StrategyEnsemble,
    rounds: u64,
    seed: u64,
) -> Result<SimReport> {
    run_classical_traced(problem, ensemble, rounds, seed, |_| {})
}

pub fn run_classical_traced(
    problem: &CcProblem,
    ensemble: &StrategyEnsemble,
    rounds: u64,
    seed: u64,
    mut on_round: impl FnMut(&RoundTrace),
) -> Result<SimReport> {
    if rounds == 0 {
        return Err(Error::ZeroRounds);
    }
    if ensemble.n() != problem.n() {
        return Err(Error::DimensionMismatch {
            context: "strategy ensemble",
            expected: problem.n(),
            found: ensemble.n(),
        });
    }
    let n = problem.n();
    let analytic = ensemble_success(problem.g(), ensemble)?;
    let mut successes = 0u64;
    for round in 0..rounds {
        let mut rng = round_rng(seed, round);
        let member = draw_member(ensemble, &mut rng);
        let (x, y) = sample_inputs(problem, &mut rng);
        let a: Vec<i8> = (0..n)
            .map(|p| member.response(p, party_bit(x, p, n)))
            .collect();
        let target = problem.target(x, &y).expect("x drawn from the support");
        let trace = RoundTrace::score(x, y, a, target);
        if trace.success {
            successes += 1;
        }
        on_round(&trace);
    }
    Ok(SimReport::from_tally(rounds, successes, analytic))
}

/// Runs the measurement-based protocol. Noise is sampled per round: with
/// probability 1 − visibility the outcomes are replaced by fair coins, which
/// reproduces the visibility-scaled correlation tensor exactly.
pub fn run_quantum(
    problem: &CcProblem,
    state: &PureState,
    settings: &MeasurementSettings,
    visibility: f64,
    rounds: u64,
    seed: u64,
) -> Result<SimReport> {
    run_quantum_traced(problem, state, settings, visibility, rounds, seed, |_| {})
}

#[allow(clippy::too_many_arguments)]
pub fn run_quantum_traced(
    problem: &CcProblem,
    state: &PureState,
    settings: &MeasurementSettings,
    visibility: f64,
    rounds: u64,
    seed: u64,
    mut on_round: impl FnMut(&RoundTrace),
) -> Result<SimReport> {
    if rounds == 0 {
        return Err(Error::ZeroRounds);
    }
    if state.n() != problem.n() {
        return Err(Error::DimensionMismatch {
            context: "state",
            expected: problem.n(),
            found: state.n(),
        });
    }
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::VisibilityOutOfRange(visibility));
    }
    let n = problem.n();
    let analytic = quantum_success(
        problem.g(),
        &correlation_tensor(state, settings, visibility)?,
    )?;

    // Per-setting outcome distributions, computed once.
    let mut distributions: Vec<Option<OutcomeDistribution>> = vec![None; 1 << n];
    for (x, slot) in distributions.iter_mut().enumerate() {
        if problem.q_at(x) > 0.0 {
            *slot = Some(outcome_distribution(state, settings, x)?);
        }
    }

    let mut successes = 0u64;
    for round in 0..rounds {
        let mut rng = round_rng(seed, round);
        let (x, y) = sample_inputs(problem, &mut rng);
        let quantum_round = rng.random::<f64>() < visibility;
        let a: Vec<i8> = if quantum_round {
            let dist = distributions[x].as_ref().expect("x drawn from the support");
            sample_outcomes(dist, &mut rng)
        } else {
            (0..n)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect()
        };
        let target = problem.target(x, &y).expect("x drawn from the support");
        let trace = RoundTrace::score(x, y, a, target);
        if trace.success {
            successes += 1;
        }
        on_round(&trace);
    }
    Ok(SimReport::from_tally(rounds, successes, analytic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use crate::ccp::build_problem;
    use crate::inequalities::{ardehali_g, lhv_bound, mermin_g, DeterministicStrategy, GTable};
    use crate::qsim::{ghz, BlochObservable};

    fn mermin3_problem() -> CcProblem {
        build_problem(mermin_g(3).unwrap())
    }

    fn mermin3_settings() -> MeasurementSettings {
        let pair = [BlochObservable::x_axis(), BlochObservable::y_axis()];
        MeasurementSettings::new(vec![pair; 3]).unwrap()
    }

    #[test]
    fn inputs_follow_the_distribution() {
        let problem = mermin3_problem();
        let mut rng = round_rng(5, 0);
        let trials = 100_000usize;
        let mut counts = [0usize; 8];
        let mut y_plus = [0usize; 3];
        for _ in 0..trials {
            let (x, y) = sample_inputs(&problem, &mut rng);
            counts[x] += 1;
            for (p, &yp) in y.iter().enumerate() {
                if yp == 1 {
                    y_plus[p] += 1;
                }
            }
        }
        let sigma = (0.25 * 0.75 / trials as f64).sqrt();
        for x in 0..8usize {
            let rate = counts[x] as f64 / trials as f64;
            if x.count_ones() % 2 == 0 {
                assert!((rate - 0.25).abs() < 4.0 * sigma, "x={x} rate {rate}");
            } else {
                assert_eq!(counts[x], 0);
            }
        }
        let y_sigma = (0.25 / trials as f64).sqrt();
        for p in 0..3 {
            let rate = y_plus[p] as f64 / trials as f64;
            assert!((rate - 0.5).abs() < 4.0 * y_sigma, "party {p} rate {rate}");
        }
    }

    #[test]
    fn point_mass_always_draws_that_setting() {
        let mut values = vec![0.0; 4];
        values[1] = 2.0;
        let problem = build_problem(GTable::new(2, values).unwrap());
        let mut rng = round_rng(9, 3);
        for _ in 0..100 {
            let (x, _) = sample_inputs(&problem, &mut rng);
            assert_eq!(x, 1);
        }
    }

    #[test]
    fn classical_argmax_concentrates_at_the_optimum() {
        let g = mermin_g(3).unwrap();
        let problem = build_problem(g.clone());
        let ensemble = StrategyEnsemble::pure(lhv_bound(&g).unwrap().strategy);
        let report = run_classical(&problem, &ensemble, 100_000, 4242).unwrap();
        assert_abs_diff_eq!(report.analytic_rate, 0.75, epsilon = 1e-12);
        assert!(report.z_score.abs() < 4.0, "z = {}", report.z_score);
    }

    #[test]
    fn classical_run_is_reproducible() {
        let g = mermin_g(3).unwrap();
        let problem = build_problem(g.clone());
        let ensemble = StrategyEnsemble::pure(lhv_bound(&g).unwrap().strategy);
        let a = run_classical(&problem, &ensemble, 10_000, 7).unwrap();
        let b = run_classical(&problem, &ensemble, 10_000, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_strategy_on_point_mass_is_all_or_nothing() {
        let mut values = vec![0.0; 4];
        values[0] = 1.0;
        let problem = build_problem(GTable::new(2, values).unwrap());
        let winner = StrategyEnsemble::pure(DeterministicStrategy::new(vec![[1, 1]; 2]).unwrap());
        let report = run_classical(&problem, &winner, 1_000, 0).unwrap();
        assert_eq!(report.successes, 1_000);
        assert_eq!(report.empirical_rate, 1.0);

        let loser = StrategyEnsemble::pure(
            DeterministicStrategy::new(vec![[-1, 1], [1, 1]]).unwrap(),
        );
        let report = run_classical(&problem, &loser, 1_000, 0).unwrap();
        assert_eq!(report.successes, 0);
    }

    #[test]
    fn quantum_mermin_is_certain() {
        let problem = mermin3_problem();
        let state = ghz(3).unwrap();
        let report =
            run_quantum(&problem, &state, &mermin3_settings(), 1.0, 100_000, 42).unwrap();
        assert_eq!(report.successes, report.rounds);
        assert_eq!(report.empirical_rate, 1.0);
        assert_abs_diff_eq!(report.analytic_rate, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn quantum_run_is_reproducible() {
        let problem = mermin3_problem();
        let state = ghz(3).unwrap();
        let a = run_quantum(&problem, &state, &mermin3_settings(), 0.8, 5_000, 77).unwrap();
        let b = run_quantum(&problem, &state, &mermin3_settings(), 0.8, 5_000, 77).unwrap();
        assert_eq!(a, b);
        let c = run_quantum(&problem, &state, &mermin3_settings(), 0.8, 5_000, 78).unwrap();
        assert_ne!(a.successes, c.successes);
    }

    #[test]
    fn quantum_chsh_rate_matches_analytic() {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
        let problem = build_problem(ardehali_g(2).unwrap());
        let state = ghz(2).unwrap();
        let settings = MeasurementSettings::equatorial(&[
            [0.0, FRAC_PI_2],
            [FRAC_PI_4, 3.0 * FRAC_PI_4],
        ])
        .unwrap();
        let report = run_quantum(&problem, &state, &settings, 1.0, 100_000, 271_828).unwrap();
        let expected = 0.5 * (1.0 + std::f64::consts::FRAC_1_SQRT_2);
        assert_abs_diff_eq!(report.analytic_rate, expected, epsilon = 1e-10);
        assert!(report.z_score.abs() < 4.0, "z = {}", report.z_score);
    }

    #[test]
    fn zero_visibility_is_coin_flipping() {
        let problem = mermin3_problem();
        let state = ghz(3).unwrap();
        let report = run_quantum(&problem, &state, &mermin3_settings(), 0.0, 100_000, 13).unwrap();
        assert_eq!(report.analytic_rate, 0.5);
        assert!(report.z_score.abs() < 4.0, "z = {}", report.z_score);
    }

    #[test]
    fn intermediate_visibility_matches_scaled_tensor() {
        let problem = mermin3_problem();
        let state = ghz(3).unwrap();
        let report = run_quantum(&problem, &state, &mermin3_settings(), 0.6, 100_000, 60).unwrap();
        // ½(1 + 0.6·16/16)
        assert_abs_diff_eq!(report.analytic_rate, 0.8, epsilon = 1e-12);
        assert!(report.z_score.abs() < 4.0, "z = {}", report.z_score);
    }

    #[test]
    fn traces_satisfy_protocol_structure() {
        let problem = mermin3_problem();
        let state = ghz(3).unwrap();
        let mut seen = 0u64;
        run_quantum_traced(&problem, &state, &mermin3_settings(), 0.7, 2_000, 99, |t| {
            seen += 1;
            // one broadcast bit per party, nothing else crosses the wire
            assert_eq!(t.broadcasts.len(), 3);
            for p in 0..3 {
                assert_eq!(t.broadcasts[p], t.a[p] * t.y[p]);
            }
            // the guess is a function of the broadcasts alone
            let product: i8 = t.broadcasts.iter().product();
            assert_eq!(t.guess, product);
            assert_eq!(t.success, t.guess == t.target);
            // success ⇔ the outcome product hits the sign of g
            let a_prod: i8 = t.a.iter().product();
            assert_eq!(t.success, a_prod == problem.sign(t.x).unwrap());
        })
        .unwrap();
        assert_eq!(seen, 2_000);
    }

    #[test]
    fn preconditions_are_checked() {
        let problem = mermin3_problem();
        let state = ghz(3).unwrap();
        assert!(matches!(
            run_quantum(&problem, &state, &mermin3_settings(), 1.0, 0, 1),
            Err(Error::ZeroRounds)
        ));
        assert!(matches!(
            run_quantum(&problem, &state, &mermin3_settings(), 1.3, 10, 1),
            Err(Error::VisibilityOutOfRange(_))
        ));
        let two_party = StrategyEnsemble::pure(DeterministicStrategy::new(vec![[1, 1]; 2]).unwrap());
        assert!(matches!(
            run_classical(&problem, &two_party, 10, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
