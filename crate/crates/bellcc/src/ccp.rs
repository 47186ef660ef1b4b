//! Distributed guessing problems induced by a weight table.
//!
//! Party p receives a setting bit x_p and a uniform ±1 value y_p. The joint
//! settings x are drawn with probability Q(x) = |g(x)| / Σ|g|, and every
//! party must output the target f = (Π_p y_p) · sgn g(x) after one round of
//! one-bit broadcasts. The success probability of any protocol in the
//! considered class is
//!
//! ```text
//! P = ½ (1 + Σ_x g(x)·E(x) / Σ|g|)
//! ```
//!
//! where E is the correlation function of whatever produces the local ±1
//! values — a deterministic strategy, shared randomness, or measurements on
//! an entangled state. The classical optimum is therefore ½(1 + B/Σ|g|)
//! with B the LHV bound, and a quantum strategy beats every classical one
//! exactly when its correlation tensor violates the Bell inequality. That
//! equivalence is asserted whenever a [`SuccessReport`] is built.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inequalities::{lhv_bound_with_cap, DeterministicStrategy, GTable, StrategyEnsemble, DEFAULT_LHV_CAP};
use crate::qsim::CorrelationTensor;

/// A weight table packaged as a communication-complexity problem.
#[derive(Debug, Clone)]
pub struct CcProblem {
    g: GTable,
    q: Vec<f64>,
    signs: Vec<i8>,
}

impl CcProblem {
    /// Settings with g(x) = 0 get Q = 0 and are excluded from the support,
    /// so the sign of g is never read there.
    pub fn new(g: GTable) -> Self {
        let total = g.total_weight();
        let q = g.values().iter().map(|v| v.abs() / total).collect();
        let signs = (0..g.values().len())
            .map(|x| g.sign(x).unwrap_or(0))
            .collect();
        Self { g, q, signs }
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn g(&self) -> &GTable {
        &self.g
    }

    /// Input distribution over setting indices.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn q_at(&self, x: usize) -> f64 {
        self.q[x]
    }

    /// sgn g(x), or `None` off the support.
    pub fn sign(&self, x: usize) -> Option<i8> {
        match self.signs[x] {
            0 => None,
            s => Some(s),
        }
    }

    /// Target value f(x, y) = (Π_p y_p)·sgn g(x); `None` off the support.
    pub fn target(&self, x: usize, y: &[i8]) -> Option<i8> {
        let s = self.sign(x)?;
        let y_prod: i8 = y.iter().product();
        Some(y_prod * s)
    }
}

/// Builds the problem induced by `g` (Q from |g|, targets from its sign).
pub fn build_problem(g: GTable) -> CcProblem {
    CcProblem::new(g)
}

/// Exact optimum over all classical protocols of the considered class:
/// ½(1 + B/Σ|g|), with B from the strategy enumeration.
pub fn classical_max_success(g: &GTable) -> Result<f64> {
    classical_max_success_with_cap(g, DEFAULT_LHV_CAP)
}

pub fn classical_max_success_with_cap(g: &GTable, cap: usize) -> Result<f64> {
    let bound = lhv_bound_with_cap(g, cap)?.bound;
    Ok(0.5 * (1.0 + bound / g.total_weight()))
}

/// Success probability of the measurement-based protocol with correlation
/// tensor `tensor`: ½(1 + Σ g·E / Σ|g|).
pub fn quantum_success(g: &GTable, tensor: &CorrelationTensor) -> Result<f64> {
    let lhs = crate::inequalities::bell_lhs(g, tensor)?;
    let p = 0.5 * (1.0 + lhs / g.total_weight());
    assert!(
        (-1e-12..=1.0 + 1e-12).contains(&p),
        "success probability {p} outside [0, 1]"
    );
    Ok(p.clamp(0.0, 1.0))
}

/// Success probability of one deterministic strategy, computed exactly:
/// Σ over the support of Q(x)·[Π_p a_p(x_p) = sgn g(x)].
pub fn strategy_success(g: &GTable, strategy: &DeterministicStrategy) -> Result<f64> {
    if strategy.n() != g.n() {
        return Err(Error::DimensionMismatch {
            context: "strategy",
            expected: g.n(),
            found: strategy.n(),
        });
    }
    let total = g.total_weight();
    let mut p = 0.0;
    for x in 0..1usize << g.n() {
        if let Some(s) = g.sign(x) {
            if strategy.product_for(x) == s {
                p += g.value(x).abs() / total;
            }
        }
    }
    Ok(p)
}

/// Success probability of a shared-randomness mixture of strategies.
pub fn ensemble_success(g: &GTable, ensemble: &StrategyEnsemble) -> Result<f64> {
    let mut p = 0.0;
    for (member, weight) in ensemble.members().iter().zip(ensemble.weights()) {
        p += weight * strategy_success(g, member)?;
    }
    Ok(p)
}

/// Side-by-side summary of one problem and one correlation tensor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SuccessReport {
    pub classical_max: f64,
    pub quantum: f64,
    pub advantage: bool,
    pub bell_lhs: f64,
    pub bound: f64,
}

/// Computes both success probabilities and checks the advantage-iff-violation
/// equivalence. Both comparisons are strict, so a tensor sitting exactly on
/// the classical bound reports no advantage.
pub fn analyze(g: &GTable, tensor: &CorrelationTensor) -> Result<SuccessReport> {
    analyze_with_cap(g, tensor, DEFAULT_LHV_CAP)
}

pub fn analyze_with_cap(g: &GTable, tensor: &CorrelationTensor, cap: usize) -> Result<SuccessReport> {
    let bound = lhv_bound_with_cap(g, cap)?.bound;
    let lhs = crate::inequalities::bell_lhs(g, tensor)?;
    let total = g.total_weight();
    let classical_max = 0.5 * (1.0 + bound / total);
    let quantum = 0.5 * (1.0 + lhs / total);
    let advantage = quantum > classical_max;
    let violation = lhs > bound;
    // The two flags can only disagree inside the numerical boundary band.
    assert!(
        advantage == violation || (lhs - bound).abs() <= 1e-9 * total.max(1.0),
        "advantage/violation mismatch: lhs {lhs}, bound {bound}"
    );
    Ok(SuccessReport {
        classical_max,
        quantum,
        advantage,
        bell_lhs: lhs,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::inequalities::{ardehali_g, lhv_bound, mermin_g};
    use crate::qsim::{
        correlation, correlation_tensor, ghz, outcome_distribution, BlochObservable,
        MeasurementSettings,
    };

    fn mermin3_settings() -> MeasurementSettings {
        let pair = [BlochObservable::x_axis(), BlochObservable::y_axis()];
        MeasurementSettings::new(vec![pair; 3]).unwrap()
    }

    /// Equatorial settings attaining the CHSH maximum for the n=2 Ardehali
    /// table: angles (0, π/2) and (π/4, 3π/4).
    fn chsh_settings() -> MeasurementSettings {
        use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
        MeasurementSettings::equatorial(&[
            [0.0, FRAC_PI_2],
            [FRAC_PI_4, 3.0 * FRAC_PI_4],
        ])
        .unwrap()
    }

    #[test]
    fn problem_distribution_mermin3() {
        let problem = build_problem(mermin_g(3).unwrap());
        for x in 0..8usize {
            if x.count_ones() % 2 == 0 {
                assert_abs_diff_eq!(problem.q_at(x), 0.25, epsilon = 1e-15);
                assert!(problem.sign(x).is_some());
            } else {
                assert_eq!(problem.q_at(x), 0.0);
                assert_eq!(problem.sign(x), None);
                assert_eq!(problem.target(x, &[1, 1, 1]), None);
            }
        }
    }

    #[test]
    fn problem_distribution_ardehali2() {
        let problem = build_problem(ardehali_g(2).unwrap());
        assert_eq!(problem.q(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn problem_point_mass() {
        let mut values = vec![0.0; 4];
        values[2] = -3.0;
        let problem = build_problem(GTable::new(2, values).unwrap());
        assert_eq!(problem.q(), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(problem.sign(2), Some(-1));
        // f = y1·y2·sgn g
        assert_eq!(problem.target(2, &[1, -1]), Some(1));
    }

    #[test]
    fn classical_optimum_closed_forms() {
        assert_abs_diff_eq!(
            classical_max_success(&mermin_g(3).unwrap()).unwrap(),
            0.75,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            classical_max_success(&mermin_g(4).unwrap()).unwrap(),
            0.75,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            classical_max_success(&ardehali_g(4).unwrap()).unwrap(),
            0.625,
            epsilon = 1e-15
        );
    }

    #[test]
    fn quantum_success_mermin_certainty() {
        let g = mermin_g(3).unwrap();
        let state = ghz(3).unwrap();
        let tensor = correlation_tensor(&state, &mermin3_settings(), 1.0).unwrap();
        assert_abs_diff_eq!(quantum_success(&g, &tensor).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn quantum_success_chsh_value() {
        let g = ardehali_g(2).unwrap();
        let state = ghz(2).unwrap();
        let tensor = correlation_tensor(&state, &chsh_settings(), 1.0).unwrap();
        let expected = 0.5 * (1.0 + std::f64::consts::FRAC_1_SQRT_2);
        assert_abs_diff_eq!(quantum_success(&g, &tensor).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn quantum_success_zero_tensor_is_coin_flip() {
        let g = mermin_g(3).unwrap();
        let tensor = CorrelationTensor::from_values(3, vec![0.0; 8], 0.0).unwrap();
        assert_eq!(quantum_success(&g, &tensor).unwrap(), 0.5);
    }

    #[test]
    fn argmax_strategy_attains_classical_max() {
        let g = mermin_g(3).unwrap();
        let lhv = lhv_bound(&g).unwrap();
        let p = strategy_success(&g, &lhv.strategy).unwrap();
        assert_abs_diff_eq!(p, classical_max_success(&g).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(p, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn constant_strategy_on_ardehali2() {
        // a ≡ +1 succeeds only where sgn g = +1, i.e. on x = (0,0).
        let g = ardehali_g(2).unwrap();
        let all_plus = DeterministicStrategy::new(vec![[1, 1]; 2]).unwrap();
        assert_abs_diff_eq!(strategy_success(&g, &all_plus).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn flip_mixture_is_coin_flip() {
        // For an odd party count the global flip negates the product, so a
        // 50/50 mixture of a strategy and its flip succeeds half the time.
        let g = mermin_g(3).unwrap();
        let strategy = lhv_bound(&g).unwrap().strategy;
        let flipped = strategy.negated();
        let ensemble = StrategyEnsemble::new(vec![strategy, flipped], vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(ensemble_success(&g, &ensemble).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn analyze_visibility_ladder() {
        let g = mermin_g(3).unwrap();
        let state = ghz(3).unwrap();
        let settings = mermin3_settings();

        let full = analyze(&g, &correlation_tensor(&state, &settings, 1.0).unwrap()).unwrap();
        assert!(full.advantage);
        assert_abs_diff_eq!(full.quantum, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(full.classical_max, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(full.bell_lhs, 16.0, epsilon = 1e-10);
        assert_eq!(full.bound, 8.0);

        // Exact boundary tensor: the simulated one sits within rounding noise
        // of it, where the strict comparison is ill-posed by construction.
        let boundary_values: Vec<f64> = (0..8usize)
            .map(|x| g.sign(x).map_or(0.0, |s| 0.5 * s as f64))
            .collect();
        let exact_boundary = CorrelationTensor::from_values(3, boundary_values, 0.5).unwrap();
        let boundary = analyze(&g, &exact_boundary).unwrap();
        assert!(!boundary.advantage);
        assert_abs_diff_eq!(boundary.quantum, 0.75, epsilon = 1e-15);
        assert_eq!(boundary.quantum, boundary.classical_max);
        let simulated = analyze(&g, &correlation_tensor(&state, &settings, 0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(simulated.quantum, simulated.classical_max, epsilon = 1e-12);

        let above = analyze(&g, &correlation_tensor(&state, &settings, 0.51).unwrap()).unwrap();
        assert!(above.advantage);
        assert_abs_diff_eq!(above.quantum - above.classical_max, 0.005, epsilon = 1e-12);
    }

    #[test]
    fn correlation_identity_from_outcome_probabilities() {
        // E(x) = sgn g(x) · (2·P_x(success) − 1) where P_x(success) is the
        // chance the outcome product equals sgn g(x).
        let g = mermin_g(3).unwrap();
        let problem = build_problem(g);
        let state = ghz(3).unwrap();
        let settings = mermin3_settings();
        for x in 0..8usize {
            let Some(target_sign) = problem.sign(x) else {
                continue;
            };
            let dist = outcome_distribution(&state, &settings, x).unwrap();
            let p_success: f64 = dist
                .probabilities()
                .iter()
                .enumerate()
                .filter(|(idx, _)| crate::bits::parity_sign(*idx) == target_sign)
                .map(|(_, p)| p)
                .sum();
            let e = correlation(&state, &settings, x).unwrap();
            assert_abs_diff_eq!(
                e,
                target_sign as f64 * (2.0 * p_success - 1.0),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn quantum_success_monotone_in_visibility() {
        let g = mermin_g(3).unwrap();
        let state = ghz(3).unwrap();
        let settings = mermin3_settings();
        let mut last = 0.0;
        for k in 0..=10 {
            let v = k as f64 / 10.0;
            let p = quantum_success(&g, &correlation_tensor(&state, &settings, v).unwrap()).unwrap();
            assert!(p >= last - 1e-15);
            last = p;
        }
    }

    #[test]
    fn theorem_holds_on_random_instances() {
        // Smaller cousin of the acceptance criterion: random WWZB members
        // against random states and settings.
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for _ in 0..100 {
            let n = if rng.random::<bool>() { 2 } else { 3 };
            let mask_bits = 1usize << n;
            let mask = rng.random_range(0..1u64 << mask_bits);
            let sign = crate::inequalities::SignFunction::from_index(n, mask).unwrap();
            let g = crate::inequalities::wwzb_g(&sign);
            let state = crate::qsim::random_state(n, &mut rng).unwrap();
            let pairs: Vec<[BlochObservable; 2]> = (0..n)
                .map(|_| {
                    [
                        BlochObservable::equatorial(rng.random::<f64>() * std::f64::consts::TAU),
                        BlochObservable::equatorial(rng.random::<f64>() * std::f64::consts::TAU),
                    ]
                })
                .collect();
            let settings = MeasurementSettings::new(pairs).unwrap();
            let tensor = correlation_tensor(&state, &settings, 1.0).unwrap();
            let report = analyze(&g, &tensor).unwrap();
            if (report.bell_lhs - report.bound).abs() > 1e-9 {
                assert_eq!(report.advantage, report.bell_lhs > report.bound);
            }
        }
    }
}
