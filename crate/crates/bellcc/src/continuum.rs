//! Functional Bell inequality for a continuous range of settings.
//!
//! Every party chooses an angle x_p ∈ [0, 2π) instead of a bit; the weight
//! kernel is cos(x_1+…+x_n) and the classical bound is 4^n (imported, not
//! recomputed). On the GHZ state with equatorial observables the correlation
//! function collapses to E(x) = V·cos(x_1+…+x_n), verified against the state
//! simulator, so both the expression Σ ↦ ∫ cos(Σx)·E(x) and the
//! normalization W = ∫ |cos(Σx)| have integrands that depend on the angle
//! sum alone.
//!
//! Quadrature: tensor-grid trapezoid on the uniform periodic grid with m
//! points per dimension. Since the integrand is constant on the diagonal
//! classes Σ indices ≡ k (mod m), and each class contains exactly m^(n−1)
//! grid points, the m^n-point sum regroups exactly into an m-term sum — the
//! same value at a fraction of the cost, which is what makes large m (and
//! with it 1e-12-level normalization accuracy) affordable at any n.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{correlation, BlochObservable, MeasurementSettings, PureState};

/// Parties are capped here by the m^n cost of the general-state grid, not
/// by the collapsed quadrature itself.
pub const MAX_CONTINUUM_PARTIES: usize = 4;

const MIN_GRID: usize = 8;

/// Point budget for general-state (non-collapsing) quadrature.
const GENERAL_GRID_CAP: u128 = 1 << 24;

/// How the shared state enters the quadrature. The GHZ case admits a closed
/// correlation form; any other state is evaluated point by point.
#[derive(Debug, Clone)]
enum SharedState {
    Ghz,
    Custom(PureState),
}

/// A continuous-settings experiment: each party measures the equatorial
/// observable at its own angle x_p, against the cosine kernel.
#[derive(Debug, Clone)]
pub struct ContinuumScenario {
    n: usize,
    grid_points: usize,
    visibility: f64,
    state: SharedState,
}

impl ContinuumScenario {
    /// The default scenario shares the GHZ state.
    pub fn new(n: usize, grid_points: usize) -> Result<Self> {
        Self::with_visibility(n, grid_points, 1.0)
    }

    pub fn with_visibility(n: usize, grid_points: usize, visibility: f64) -> Result<Self> {
        Self::build(n, grid_points, visibility, SharedState::Ghz)
    }

    /// Same experiment on an arbitrary shared state. This forfeits the GHZ
    /// fast path: the expression is integrated over the full m^n grid.
    pub fn with_state(state: PureState, grid_points: usize, visibility: f64) -> Result<Self> {
        Self::build(state.n(), grid_points, visibility, SharedState::Custom(state))
    }

    fn build(
        n: usize,
        grid_points: usize,
        visibility: f64,
        state: SharedState,
    ) -> Result<Self> {
        if n < 1 || n > MAX_CONTINUUM_PARTIES {
            return Err(Error::PartyCountOutOfRange {
                n,
                min: 1,
                max: MAX_CONTINUUM_PARTIES,
            });
        }
        if grid_points < MIN_GRID || grid_points % 2 != 0 {
            return Err(Error::BadGridResolution {
                m: grid_points,
                min: MIN_GRID,
            });
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::VisibilityOutOfRange(visibility));
        }
        if matches!(state, SharedState::Custom(_)) {
            // general states pay the full m^n grid; keep it desk-scale
            let points = (grid_points as u128).pow(n as u32);
            if points > GENERAL_GRID_CAP {
                return Err(Error::GridTooLarge {
                    points,
                    cap: GENERAL_GRID_CAP,
                });
            }
        }
        Ok(Self {
            n,
            grid_points,
            visibility,
            state,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    /// Correlation function at the given angles. For GHZ this is the closed
    /// form V·cos(x_1+…+x_n); otherwise the state simulator evaluates the
    /// product of equatorial observables directly.
    pub fn correlation_at(&self, angles: &[f64]) -> f64 {
        debug_assert_eq!(angles.len(), self.n);
        match &self.state {
            SharedState::Ghz => self.visibility * angles.iter().sum::<f64>().cos(),
            SharedState::Custom(state) => {
                let pairs: Vec<[BlochObservable; 2]> = angles
                    .iter()
                    .map(|&a| {
                        let o = BlochObservable::equatorial(a);
                        [o, o]
                    })
                    .collect();
                let settings = MeasurementSettings::new(pairs).expect("validated party count");
                self.visibility
                    * correlation(state, &settings, 0).expect("dimensions agree by construction")
            }
        }
    }

    fn is_ghz(&self) -> bool {
        matches!(self.state, SharedState::Ghz)
    }
}

/// Kahan-compensated sum of `f(2πk/m)` over one period, scaled by the full
/// tensor-grid trapezoid weight. Exact regrouping of the m^n-point sum.
fn diagonal_quadrature(n: usize, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = TAU / m as f64;
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for k in 0..m {
        let term = f(k as f64 * h);
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    // (2π/m)^n · m^(n−1) · Σ, factored to avoid forming m^(n−1)
    TAU.powi(n as i32 - 1) * h * sum
}

/// Honest m^n tensor-grid trapezoid for integrands that do not collapse to
/// the diagonal; also the cross-check oracle for the collapsed path.
fn full_grid_quadrature(n: usize, m: usize, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let h = TAU / m as f64;
    let mut idx = vec![0usize; n];
    let mut angles = vec![0.0f64; n];
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    loop {
        for (a, &k) in angles.iter_mut().zip(idx.iter()) {
            *a = k as f64 * h;
        }
        let term = f(&angles);
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                return h.powi(n as i32) * sum;
            }
        }
    }
}

/// Left side of the functional inequality: ∫ cos(Σx)·E(x) dx over [0,2π)^n.
pub fn functional_lhs(scenario: &ContinuumScenario) -> f64 {
    let v = scenario.visibility;
    if scenario.is_ghz() {
        diagonal_quadrature(scenario.n, scenario.grid_points, |u| {
            let c = u.cos();
            v * c * c
        })
    } else {
        full_grid_quadrature(scenario.n, scenario.grid_points, |angles| {
            angles.iter().sum::<f64>().cos() * scenario.correlation_at(angles)
        })
    }
}

/// Normalization W = ∫ |cos(Σx)| dx, the continuous stand-in for Σ|g|.
pub fn weight_normalization(scenario: &ContinuumScenario) -> f64 {
    diagonal_quadrature(scenario.n, scenario.grid_points, |u| u.cos().abs())
}

/// Exact classical bound of the functional inequality.
pub fn classical_bound(n: usize) -> f64 {
    4.0f64.powi(n as i32)
}

/// (classical_max, quantum) success probabilities:
/// ½(1 + 4^n/W) and ½(1 + lhs/W).
pub fn continuum_success(scenario: &ContinuumScenario) -> (f64, f64) {
    let w = weight_normalization(scenario);
    let lhs = functional_lhs(scenario);
    let classical = 0.5 * (1.0 + classical_bound(scenario.n) / w);
    let quantum = 0.5 * (1.0 + lhs / w);
    (classical, quantum)
}

/// Full record of one continuum evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContinuumReport {
    pub n: usize,
    pub grid_points: usize,
    pub visibility: f64,
    pub lhs: f64,
    pub bound: f64,
    pub weight: f64,
    pub classical_max: f64,
    pub quantum: f64,
    pub advantage: bool,
}

pub fn continuum_report(scenario: &ContinuumScenario) -> ContinuumReport {
    let w = weight_normalization(scenario);
    let lhs = functional_lhs(scenario);
    let bound = classical_bound(scenario.n);
    let classical_max = 0.5 * (1.0 + bound / w);
    let quantum = 0.5 * (1.0 + lhs / w);
    ContinuumReport {
        n: scenario.n,
        grid_points: scenario.grid_points,
        visibility: scenario.visibility,
        lhs,
        bound,
        weight: w,
        classical_max,
        quantum,
        advantage: lhs > bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_regrouping_equals_full_grid() {
        for n in [2usize, 3] {
            for m in [8usize, 16, 32] {
                for f in [
                    (|u: f64| u.cos() * u.cos()) as fn(f64) -> f64,
                    (|u: f64| u.cos().abs()) as fn(f64) -> f64,
                ] {
                    let collapsed = diagonal_quadrature(n, m, f);
                    let full =
                        full_grid_quadrature(n, m, |angles| f(angles.iter().sum::<f64>()));
                    let scale = full.abs().max(1.0);
                    assert!(
                        (collapsed - full).abs() <= 1e-12 * scale,
                        "n={n} m={m}: {collapsed} vs {full}"
                    );
                }
            }
        }
    }

    #[test]
    fn custom_ghz_state_matches_fast_path() {
        // Feeding the GHZ state through the general-state route must land on
        // the collapsed result, up to simulator rounding.
        let fast = functional_lhs(&ContinuumScenario::new(2, 32).unwrap());
        let state = crate::qsim::ghz(2).unwrap();
        let general =
            functional_lhs(&ContinuumScenario::with_state(state, 32, 1.0).unwrap());
        assert_abs_diff_eq!(fast, general, epsilon = 1e-10);
    }

    #[test]
    fn product_state_has_no_equatorial_correlations() {
        // |0…0⟩ is orthogonal to every equatorial axis, so E ≡ 0.
        use num_complex::Complex64;
        let mut amps = vec![Complex64::ZERO; 4];
        amps[0] = Complex64::new(1.0, 0.0);
        let state = crate::qsim::PureState::from_amplitudes(2, amps).unwrap();
        let scn = ContinuumScenario::with_state(state, 16, 1.0).unwrap();
        assert_abs_diff_eq!(functional_lhs(&scn), 0.0, epsilon = 1e-12);
        let report = continuum_report(&scn);
        assert!(!report.advantage);
        assert_abs_diff_eq!(report.quantum, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn general_state_grid_budget_is_enforced() {
        let state = crate::qsim::ghz(4).unwrap();
        assert!(matches!(
            ContinuumScenario::with_state(state, 1 << 8, 1.0),
            Err(crate::error::Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn lhs_matches_cosine_square_integral() {
        // ∫ cos²(Σx) = (2π)^n / 2; the trapezoid is exact for this integrand.
        let scn = ContinuumScenario::new(2, 64).unwrap();
        assert_abs_diff_eq!(functional_lhs(&scn), TAU * TAU / 2.0, epsilon = 1e-9);

        let scn = ContinuumScenario::new(3, 32).unwrap();
        assert_abs_diff_eq!(functional_lhs(&scn), TAU.powi(3) / 2.0, epsilon = 1e-8);

        let dead = ContinuumScenario::with_visibility(2, 64, 0.0).unwrap();
        assert_eq!(functional_lhs(&dead), 0.0);
    }

    #[test]
    fn lhs_stable_under_grid_doubling() {
        let coarse = functional_lhs(&ContinuumScenario::new(2, 64).unwrap());
        let fine = functional_lhs(&ContinuumScenario::new(2, 128).unwrap());
        assert!((coarse - fine).abs() < 1e-9);
    }

    #[test]
    fn weight_converges_to_closed_form() {
        // ∫ |cos(Σx)| → 4·(2π)^(n−1); |cos| has kinks, so convergence is
        // O(m⁻²) and tight tolerance needs a fine grid.
        for n in [2usize, 3] {
            let w = weight_normalization(&ContinuumScenario::new(n, 1 << 14).unwrap());
            let exact = 4.0 * TAU.powi(n as i32 - 1);
            assert!(
                (w - exact).abs() / exact < 1e-6,
                "n={n}: {w} vs {exact}"
            );
        }
    }

    #[test]
    fn success_probabilities_match_quoted_values() {
        use std::f64::consts::{FRAC_2_PI, FRAC_PI_4};
        let scn = ContinuumScenario::new(2, 1 << 21).unwrap();
        let (classical, quantum) = continuum_success(&scn);
        assert_abs_diff_eq!(quantum, 0.5 * (1.0 + FRAC_PI_4), epsilon = 1e-9);
        assert_abs_diff_eq!(classical, 0.5 * (1.0 + FRAC_2_PI), epsilon = 1e-12);

        let scn = ContinuumScenario::new(3, 1 << 21).unwrap();
        let (classical, _) = continuum_success(&scn);
        assert_abs_diff_eq!(
            classical,
            0.5 * (1.0 + FRAC_2_PI * FRAC_2_PI),
            epsilon = 1e-12
        );
    }

    #[test]
    fn quantum_success_does_not_depend_on_party_count() {
        use std::f64::consts::FRAC_PI_4;
        for n in [2usize, 3, 4] {
            let (_, quantum) = continuum_success(&ContinuumScenario::new(n, 1 << 16).unwrap());
            assert_abs_diff_eq!(quantum, 0.5 * (1.0 + FRAC_PI_4), epsilon = 1e-8);
        }
    }

    #[test]
    fn classical_success_decays_toward_coin_flipping() {
        let mut last = 1.0;
        for n in [2usize, 3, 4] {
            let (classical, _) = continuum_success(&ContinuumScenario::new(n, 1 << 16).unwrap());
            assert!(classical < last);
            assert!(classical > 0.5);
            last = classical;
        }
    }

    #[test]
    fn closed_form_correlation_matches_state_simulator() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2usize, 3] {
            let scn = ContinuumScenario::new(n, 64).unwrap();
            let state = crate::qsim::ghz(n).unwrap();
            for _ in 0..20 {
                let angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * TAU).collect();
                let pairs: Vec<[crate::qsim::BlochObservable; 2]> = angles
                    .iter()
                    .map(|&a| {
                        [
                            crate::qsim::BlochObservable::equatorial(a),
                            crate::qsim::BlochObservable::equatorial(0.0),
                        ]
                    })
                    .collect();
                let settings = crate::qsim::MeasurementSettings::new(pairs).unwrap();
                let simulated = crate::qsim::correlation(&state, &settings, 0).unwrap();
                assert_abs_diff_eq!(scn.correlation_at(&angles), simulated, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn scenario_validation() {
        assert!(ContinuumScenario::new(0, 64).is_err());
        assert!(ContinuumScenario::new(5, 64).is_err());
        assert!(ContinuumScenario::new(2, 7).is_err());
        assert!(ContinuumScenario::new(2, 9).is_err());
        assert!(ContinuumScenario::with_visibility(2, 64, 1.2).is_err());
    }
}
