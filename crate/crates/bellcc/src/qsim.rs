//! State-vector simulation of n-qubit correlation experiments.
//!
//! Parties hold one qubit each and measure one of two dichotomic (±1-valued)
//! observables, selected by a setting bit. Everything downstream — Bell
//! expressions, success probabilities, protocol rounds — consumes either the
//! full-correlation function `E(x_1,…,x_n)` or per-setting outcome
//! distributions produced here.
//!
//! Index convention: party 0 owns the most significant bit of both the
//! computational-basis index and the setting index (see [`crate::bits`]).
//!
//! Noise is handled as a visibility factor on the correlation tensor rather
//! than by density matrices: admixing white noise to the state multiplies
//! every full correlation of traceless observables by the visibility, because
//! the maximally mixed state carries no correlations at all.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bits::{outcome_vector, parity_sign, party_bit};
use crate::error::{Error, Result};

/// State vectors are capped at this many qubits (2^12 amplitudes).
pub const MAX_PARTIES: usize = 12;

const NORM_TOL: f64 = 1e-12;

fn check_party_count(n: usize) -> Result<()> {
    if n < 1 || n > MAX_PARTIES {
        return Err(Error::PartyCountOutOfRange {
            n,
            min: 1,
            max: MAX_PARTIES,
        });
    }
    Ok(())
}

/// Pure state of `n` qubits as 2^n complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Builds a state from raw amplitudes; they must already have unit norm.
    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_party_count(n)?;
        let dim = 1usize << n;
        if amplitudes.len() != dim {
            return Err(Error::AmplitudeLength {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        let deviation = (norm_sq - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(Self { n, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }
}

/// GHZ state (|0…0⟩ + |1…1⟩)/√2 on `n` qubits.
pub fn ghz(n: usize) -> Result<PureState> {
    check_party_count(n)?;
    let dim = 1usize << n;
    let mut amplitudes = vec![Complex64::ZERO; dim];
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    amplitudes[0] = a;
    amplitudes[dim - 1] = a;
    Ok(PureState { n, amplitudes })
}

/// Haar-like random state: independent complex Gaussian amplitudes, normalized.
pub fn random_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PureState> {
    check_party_count(n)?;
    let dim = 1usize << n;
    loop {
        let amplitudes: Vec<Complex64> = (0..dim)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im)
            })
            .collect();
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm_sq > 1e-12 {
            let scale = norm_sq.sqrt().recip();
            return Ok(PureState {
                n,
                amplitudes: amplitudes.into_iter().map(|a| a * scale).collect(),
            });
        }
        // astronomically unlikely; redraw
    }
}

/// Dichotomic single-qubit observable `v · σ` for a unit Bloch vector `v`.
///
/// The induced 2×2 matrix is Hermitian, traceless, and squares to the
/// identity, so its spectrum is exactly ±1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochObservable {
    vector: [f64; 3],
}

impl BlochObservable {
    /// Requires `v` to be unit length within 1e-12.
    pub fn new(vector: [f64; 3]) -> Result<Self> {
        let norm = (vector[0] * vector[0] + vector[1] * vector[1] + vector[2] * vector[2]).sqrt();
        let deviation = (norm - 1.0).abs();
        if deviation > NORM_TOL {
            return Err(Error::NotUnitVector { deviation });
        }
        Ok(Self { vector })
    }

    /// Rescales an arbitrary non-zero vector to unit length.
    pub fn normalized(vector: [f64; 3]) -> Result<Self> {
        let norm = (vector[0] * vector[0] + vector[1] * vector[1] + vector[2] * vector[2]).sqrt();
        if norm < 1e-300 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            vector: [vector[0] / norm, vector[1] / norm, vector[2] / norm],
        })
    }

    /// Equatorial observable cos(φ)·σ_x + sin(φ)·σ_y.
    pub fn equatorial(phi: f64) -> Self {
        Self {
            vector: [phi.cos(), phi.sin(), 0.0],
        }
    }

    pub fn x_axis() -> Self {
        Self {
            vector: [1.0, 0.0, 0.0],
        }
    }

    pub fn y_axis() -> Self {
        Self {
            vector: [0.0, 1.0, 0.0],
        }
    }

    pub fn z_axis() -> Self {
        Self {
            vector: [0.0, 0.0, 1.0],
        }
    }

    pub fn vector(&self) -> [f64; 3] {
        self.vector
    }

    /// The observable as a 2×2 matrix [[z, x−iy], [x+iy, −z]].
    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let [x, y, z] = self.vector;
        [
            [Complex64::new(z, 0.0), Complex64::new(x, -y)],
            [Complex64::new(x, y), Complex64::new(-z, 0.0)],
        ]
    }

    /// Rows of the unitary mapping the observable's eigenbasis to the
    /// computational basis: row 0 is ⟨+|, row 1 is ⟨−|.
    ///
    /// Two algebraically equivalent forms are used so the denominators
    /// 1 ± z never vanish.
    pub(crate) fn eigenbasis_rows(&self) -> [[Complex64; 2]; 2] {
        let [x, y, z] = self.vector;
        if z >= 0.0 {
            let d = (2.0 * (1.0 + z)).sqrt();
            [
                [Complex64::new((1.0 + z) / d, 0.0), Complex64::new(x / d, -y / d)],
                [Complex64::new(-x / d, -y / d), Complex64::new((1.0 + z) / d, 0.0)],
            ]
        } else {
            let d = (2.0 * (1.0 - z)).sqrt();
            [
                [Complex64::new(x / d, y / d), Complex64::new((1.0 - z) / d, 0.0)],
                [Complex64::new((1.0 - z) / d, 0.0), Complex64::new(-x / d, y / d)],
            ]
        }
    }
}

/// Per-party measurement choices: observable 0 for setting bit 0,
/// observable 1 for setting bit 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSettings {
    pairs: Vec<[BlochObservable; 2]>,
}

impl MeasurementSettings {
    pub fn new(pairs: Vec<[BlochObservable; 2]>) -> Result<Self> {
        check_party_count(pairs.len())?;
        Ok(Self { pairs })
    }

    /// All-equatorial settings from per-party angle pairs `[φ_0, φ_1]`.
    pub fn equatorial(angles: &[[f64; 2]]) -> Result<Self> {
        Self::new(
            angles
                .iter()
                .map(|&[a0, a1]| [BlochObservable::equatorial(a0), BlochObservable::equatorial(a1)])
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn observable(&self, party: usize, choice: usize) -> &BlochObservable {
        &self.pairs[party][choice]
    }

    pub(crate) fn set_observable(&mut self, party: usize, choice: usize, obs: BlochObservable) {
        self.pairs[party][choice] = obs;
    }

    /// Observable chosen by party `p` under setting index `x`.
    pub(crate) fn chosen(&self, party: usize, x: usize) -> &BlochObservable {
        &self.pairs[party][party_bit(x, party, self.n())]
    }
}

/// Full-correlation values E(x) for every setting index, with the visibility
/// factor already applied.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    n: usize,
    values: Vec<f64>,
    visibility: f64,
}

impl CorrelationTensor {
    /// Builds a tensor from explicit values (used for deterministic-strategy
    /// tensors and in tests). Every entry must lie in [−1, 1] within 1e-12.
    pub fn from_values(n: usize, values: Vec<f64>, visibility: f64) -> Result<Self> {
        check_party_count(n)?;
        let dim = 1usize << n;
        if values.len() != dim {
            return Err(Error::TableLength {
                expected: dim,
                found: values.len(),
            });
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::VisibilityOutOfRange(visibility));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(i));
            }
            if v.abs() > 1.0 + NORM_TOL {
                return Err(Error::NonFiniteValue(i));
            }
        }
        Ok(Self {
            n,
            values,
            visibility,
        })
    }

    /// Correlation tensor of the product of local ±1 responses of a
    /// deterministic strategy: E(x) = Π_i a_i(x_i).
    pub fn from_strategy(strategy: &crate::inequalities::DeterministicStrategy) -> Self {
        let n = strategy.n();
        let values = (0..1usize << n)
            .map(|x| strategy.product_for(x) as f64)
            .collect();
        Self {
            n,
            values,
            visibility: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, x: usize) -> f64 {
        self.values[x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn visibility(&self) -> f64 {
        self.visibility
    }
}

/// Outcome probabilities P(a | x) for one fixed setting index.
///
/// Outcomes are indexed like basis states: bit 0 of party p means a_p = +1.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    n: usize,
    probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Expectation of the product of all parties' outcomes.
    pub fn correlation_moment(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(idx, p)| parity_sign(idx) as f64 * p)
            .sum()
    }
}

fn check_dims(state: &PureState, settings: &MeasurementSettings) -> Result<()> {
    if state.n() != settings.n() {
        return Err(Error::DimensionMismatch {
            context: "measurement settings",
            expected: state.n(),
            found: settings.n(),
        });
    }
    Ok(())
}

/// Applies a 2×2 matrix to the qubit owned by `party` of an `n`-qubit vector.
fn apply_one_qubit(amps: &mut [Complex64], n: usize, party: usize, m: &[[Complex64; 2]; 2]) {
    let stride = 1usize << (n - 1 - party);
    let dim = amps.len();
    let mut base = 0;
    while base < dim {
        for i0 in base..base + stride {
            let i1 = i0 + stride;
            let a0 = amps[i0];
            let a1 = amps[i1];
            amps[i0] = m[0][0] * a0 + m[0][1] * a1;
            amps[i1] = m[1][0] * a0 + m[1][1] * a1;
        }
        base += stride << 1;
    }
}

/// Bell-type correlation function: expectation of ⊗_i O^i_{x_i} in `state`.
pub fn correlation(state: &PureState, settings: &MeasurementSettings, x: usize) -> Result<f64> {
    check_dims(state, settings)?;
    let n = state.n();
    let mut work = state.amplitudes.clone();
    for party in 0..n {
        apply_one_qubit(&mut work, n, party, &settings.chosen(party, x).matrix());
    }
    let expectation: Complex64 = state
        .amplitudes
        .iter()
        .zip(&work)
        .map(|(a, b)| a.conj() * b)
        .sum();
    debug_assert!(expectation.im.abs() < 1e-9);
    Ok(expectation.re)
}

/// Correlation tensor over all 2^n settings, scaled by `visibility`.
pub fn correlation_tensor(
    state: &PureState,
    settings: &MeasurementSettings,
    visibility: f64,
) -> Result<CorrelationTensor> {
    check_dims(state, settings)?;
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::VisibilityOutOfRange(visibility));
    }
    let n = state.n();
    let values = (0..1usize << n)
        .map(|x| correlation(state, settings, x).map(|e| visibility * e))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationTensor {
        n,
        values,
        visibility,
    })
}

/// Joint outcome distribution P(a | x) for the setting index `x`.
///
/// Rotates each qubit into the eigenbasis of its chosen observable; the
/// squared amplitudes of the rotated state are the outcome probabilities.
/// This is a second, independent route to the correlation function (the
/// distribution's correlation moment must reproduce [`correlation`]).
pub fn outcome_distribution(
    state: &PureState,
    settings: &MeasurementSettings,
    x: usize,
) -> Result<OutcomeDistribution> {
    check_dims(state, settings)?;
    let n = state.n();
    let mut work = state.amplitudes.clone();
    for party in 0..n {
        apply_one_qubit(
            &mut work,
            n,
            party,
            &settings.chosen(party, x).eigenbasis_rows(),
        );
    }
    let probabilities: Vec<f64> = work.iter().map(|a| a.norm_sqr()).collect();
    debug_assert!((probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    Ok(OutcomeDistribution { n, probabilities })
}

/// Draws one joint outcome (±1 per party) by inverse CDF over the table.
pub fn sample_outcomes<R: Rng + ?Sized>(dist: &OutcomeDistribution, rng: &mut R) -> Vec<i8> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let last = dist.probabilities.len() - 1;
    for (idx, p) in dist.probabilities.iter().enumerate() {
        acc += p;
        if u < acc || idx == last {
            return outcome_vector(idx, dist.n);
        }
    }
    unreachable!()
}
