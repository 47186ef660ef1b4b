//! Correlation Bell inequalities with two settings per party.
//!
//! A [`GTable`] assigns a real weight g(x) to every joint setting choice
//! x = (x_1,…,x_n). The Bell expression Σ_x g(x)·E(x) is bounded by B for
//! every local realistic model; [`lhv_bound`] finds B exactly by enumerating
//! all 4^n deterministic strategies. Shared randomness cannot help: the
//! expression is affine in the strategy mixture, so the maximum over mixed
//! strategies is attained at a pure one (tested as a property).
//!
//! The WWZB family covers every inequality generated by a sign function
//! S : {−1,+1}^n → {−1,+1} via
//!
//! ```text
//! g(x_1,…,x_n) = Σ_s S(s_1,…,s_n) · s_1^{x_1} · … · s_n^{x_n}
//! ```
//!
//! giving 2^(2^n) members, all with classical bound 2^n. The Mermin and
//! Ardehali weight tables are the closed-form members most violated by the
//! GHZ state. Sign functions that factor into per-party signs generate
//! single-support weight tables, which no quantum state can violate.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bits::party_bit;
use crate::error::{Error, Result};
use crate::qsim::{correlation_tensor, BlochObservable, CorrelationTensor, MeasurementSettings, PureState};

/// Default cap on the party count for the 4^n strategy enumeration.
pub const DEFAULT_LHV_CAP: usize = 8;

/// Largest party count for which the 2^(2^n) family can be enumerated.
pub const MAX_WWZB_PARTIES: usize = 4;

/// Default number of random restarts for [`optimize_settings`].
pub const DEFAULT_RESTARTS: usize = 32;

/// Default relative-improvement stopping tolerance for [`optimize_settings`].
pub const DEFAULT_OPT_TOLERANCE: f64 = 1e-10;

/// Real-valued weight function over the 2^n joint setting choices.
#[derive(Debug, Clone, PartialEq)]
pub struct GTable {
    n: usize,
    values: Vec<f64>,
}

/// Serialized form of a [`GTable`]: `{"n": …, "values": […]}`.
#[derive(Serialize, Deserialize)]
struct GTableFile {
    n: usize,
    values: Vec<f64>,
}

impl GTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n < 1 || n > crate::qsim::MAX_PARTIES {
            return Err(Error::PartyCountOutOfRange {
                n,
                min: 1,
                max: crate::qsim::MAX_PARTIES,
            });
        }
        let dim = 1usize << n;
        if values.len() != dim {
            return Err(Error::TableLength {
                expected: dim,
                found: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(i));
            }
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroWeightTable);
        }
        Ok(Self { n, values })
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

    /// Σ_x |g(x)|, the normalization of the induced input distribution.
    pub fn total_weight(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// Sign of g at `x`, or `None` where g vanishes.
    pub fn sign(&self, x: usize) -> Option<i8> {
        let v = self.values[x];
        if v > 0.0 {
            Some(1)
        } else if v < 0.0 {
            Some(-1)
        } else {
            None
        }
    }

    /// The table as exact integers, when every entry is one.
    pub fn integer_values(&self) -> Option<Vec<i64>> {
        const MAX_EXACT: f64 = 9e15; // below 2^53
        self.values
            .iter()
            .map(|&v| {
                if v.fract() == 0.0 && v.abs() < MAX_EXACT {
                    Some(v as i64)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GTableFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(file.n, file.values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GTableFile {
            n: self.n,
            values: self.values.clone(),
        })
        .expect("serialization cannot fail")
    }
}

/// ±1-valued function on {−1,+1}^n, stored at s-indices where the bit of
/// party p is (s_p + 1)/2, party 0 most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignFunction {
    n: usize,
    signs: Vec<i8>,
}

#[derive(Serialize, Deserialize)]
struct SignFunctionFile {
    n: usize,
    /// Hexadecimal bitmask of 2^n bits; bit j is (S+1)/2 at s-index j.
    mask: String,
}

impl SignFunction {
    pub fn new(n: usize, signs: Vec<i8>) -> Result<Self> {
        if n < 1 || n > crate::qsim::MAX_PARTIES {
            return Err(Error::PartyCountOutOfRange {
                n,
                min: 1,
                max: crate::qsim::MAX_PARTIES,
            });
        }
        let dim = 1usize << n;
        if signs.len() != dim {
            return Err(Error::TableLength {
                expected: dim,
                found: signs.len(),
            });
        }
        for (i, &s) in signs.iter().enumerate() {
            if s != 1 && s != -1 {
                return Err(Error::InvalidSign { index: i, value: s });
            }
        }
        Ok(Self { n, signs })
    }

    /// Builds from a closure over the ±1 tuple (s_1,…,s_n).
    pub fn from_fn(n: usize, f: impl Fn(&[i8]) -> i8) -> Result<Self> {
        let dim = 1usize << n;
        let mut signs = Vec::with_capacity(dim);
        for j in 0..dim {
            let s: Vec<i8> = (0..n)
                .map(|p| if party_bit(j, p, n) == 1 { 1 } else { -1 })
                .collect();
            signs.push(f(&s));
        }
        Self::new(n, signs)
    }

    /// Decodes the bitmask index: bit j of `mask` is (S+1)/2 at s-index j.
    pub fn from_index(n: usize, mask: u64) -> Result<Self> {
        if n > MAX_WWZB_PARTIES {
            return Err(Error::EnumerationCapExceeded {
                n,
                cap: MAX_WWZB_PARTIES,
            });
        }
        let dim = 1usize << n;
        let signs = (0..dim)
            .map(|j| if (mask >> j) & 1 == 1 { 1 } else { -1 })
            .collect();
        Self::new(n, signs)
    }

    pub fn index(&self) -> u64 {
        self.signs
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .fold(0u64, |acc, (j, _)| acc | (1u64 << j))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Value at the packed s-index.
    pub fn value(&self, s_index: usize) -> i8 {
        self.signs[s_index]
    }

    /// Hex bitmask, zero-padded to 2^n bits.
    pub fn to_hex(&self) -> String {
        let digits = (1usize << self.n).div_ceil(4);
        format!("{:0width$x}", self.index(), width = digits)
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        let trimmed = hex.trim().trim_start_matches("0x").trim_start_matches("0X");
        let mask = u64::from_str_radix(trimmed, 16)
            .map_err(|e| Error::Parse(format!("bad hex mask {hex:?}: {e}")))?;
        if n <= MAX_WWZB_PARTIES && n >= 1 {
            let dim = 1usize << n;
            if dim < 64 && mask >> dim != 0 {
                return Err(Error::Parse(format!(
                    "mask {hex:?} has more than 2^{n} bits"
                )));
            }
        }
        Self::from_index(n, mask)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SignFunctionFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_hex(file.n, &file.mask)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SignFunctionFile {
            n: self.n,
            mask: self.to_hex(),
        })
        .expect("serialization cannot fail")
    }
}

/// A weight table together with its exact classical bound.
#[derive(Debug, Clone)]
pub struct BellInequality {
    g: GTable,
    classical_bound: f64,
}

impl BellInequality {
    /// Computes the bound by exhaustive strategy enumeration.
    pub fn from_table(g: GTable) -> Result<Self> {
        Self::from_table_with_cap(g, DEFAULT_LHV_CAP)
    }

    pub fn from_table_with_cap(g: GTable, cap: usize) -> Result<Self> {
        let bound = lhv_bound_with_cap(&g, cap)?.bound;
        Ok(Self {
            g,
            classical_bound: bound,
        })
    }

    pub fn g(&self) -> &GTable {
        &self.g
    }

    pub fn classical_bound(&self) -> f64 {
        self.classical_bound
    }
}

/// Local deterministic responses a_p(x_p) ∈ {±1} for each party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicStrategy {
    choices: Vec<[i8; 2]>,
}

impl DeterministicStrategy {
    pub fn new(choices: Vec<[i8; 2]>) -> Result<Self> {
        if choices.is_empty() {
            return Err(Error::PartyCountOutOfRange {
                n: 0,
                min: 1,
                max: crate::qsim::MAX_PARTIES,
            });
        }
        for (p, pair) in choices.iter().enumerate() {
            for &v in pair {
                if v != 1 && v != -1 {
                    return Err(Error::InvalidSign { index: p, value: v });
                }
            }
        }
        Ok(Self { choices })
    }

    /// Decodes a strategy index: two bits per party, party 0 in the most
    /// significant position; within a party, the high bit selects a_p(0)
    /// and the low bit a_p(1); bit value 0 encodes +1.
    pub fn from_index(n: usize, index: u64) -> Self {
        let choices = (0..n)
            .map(|p| {
                let shift = 2 * (n - 1 - p);
                let b0 = (index >> (shift + 1)) & 1;
                let b1 = (index >> shift) & 1;
                [if b0 == 0 { 1 } else { -1 }, if b1 == 0 { 1 } else { -1 }]
            })
            .collect();
        Self { choices }
    }

    pub fn index(&self) -> u64 {
        let n = self.n();
        let mut acc = 0u64;
        for (p, pair) in self.choices.iter().enumerate() {
            let shift = 2 * (n - 1 - p);
            if pair[0] == -1 {
                acc |= 1 << (shift + 1);
            }
            if pair[1] == -1 {
                acc |= 1 << shift;
            }
        }
        acc
    }

    pub fn n(&self) -> usize {
        self.choices.len()
    }

    /// Party `p`'s response to its setting bit.
    pub fn response(&self, party: usize, setting: usize) -> i8 {
        self.choices[party][setting]
    }

    /// Product of all parties' responses under the joint setting index `x`.
    pub fn product_for(&self, x: usize) -> i8 {
        let n = self.n();
        let mut acc = 1i8;
        for (p, pair) in self.choices.iter().enumerate() {
            acc *= pair[party_bit(x, p, n)];
        }
        acc
    }

    /// Strategy with every response negated.
    pub fn negated(&self) -> Self {
        Self {
            choices: self.choices.iter().map(|pair| [-pair[0], -pair[1]]).collect(),
        }
    }

    pub fn choices(&self) -> &[[i8; 2]] {
        &self.choices
    }
}

/// Deterministic strategies mixed by shared randomness.
#[derive(Debug, Clone)]
pub struct StrategyEnsemble {
    members: Vec<DeterministicStrategy>,
    weights: Vec<f64>,
}

impl StrategyEnsemble {
    pub fn new(members: Vec<DeterministicStrategy>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if members.len() != weights.len() {
            return Err(Error::TableLength {
                expected: members.len(),
                found: weights.len(),
            });
        }
        let n = members[0].n();
        for m in &members {
            if m.n() != n {
                return Err(Error::DimensionMismatch {
                    context: "ensemble member",
                    expected: n,
                    found: m.n(),
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadEnsembleWeights { sum });
        }
        Ok(Self { members, weights })
    }

    /// Single deterministic strategy (no shared randomness).
    pub fn pure(strategy: DeterministicStrategy) -> Self {
        Self {
            members: vec![strategy],
            weights: vec![1.0],
        }
    }

    pub fn members(&self) -> &[DeterministicStrategy] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.members[0].n()
    }
}

/// Transform from a (possibly real-valued) table over {−1,+1}^n to the
/// weight table: g(x) = Σ_s T(s) · Π_p s_p^{x_p}. Exact inverse exists,
/// so distinct tables give distinct weight functions.
#[cfg(test)]
pub(crate) fn sign_table_transform(n: usize, table: &[f64]) -> Vec<f64> {
    let dim = 1usize << n;
    debug_assert_eq!(table.len(), dim);
    let mut g = vec![0.0f64; dim];
    for (x, gx) in g.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, t) in table.iter().enumerate() {
            // Π_p s_p^{x_p}: each party with setting bit 1 contributes s_p.
            let mut sign = 1i32;
            for p in 0..n {
                if party_bit(x, p, n) == 1 && party_bit(j, p, n) == 0 {
                    sign = -sign; // s_p = −1 at bit 0
                }
            }
            acc += sign as f64 * t;
        }
        *gx = acc;
    }
    g
}

/// Weight table of the WWZB member generated by `sign`.
///
/// All values are integers of absolute value at most 2^n, computed exactly.
pub fn wwzb_g(sign: &SignFunction) -> GTable {
    let n = sign.n();
    let dim = 1usize << n;
    let mut values = vec![0.0f64; dim];
    for (x, gx) in values.iter_mut().enumerate() {
        let mut acc = 0i64;
        for j in 0..dim {
            let mut term = sign.value(j) as i64;
            for p in 0..n {
                if party_bit(x, p, n) == 1 && party_bit(j, p, n) == 0 {
                    term = -term;
                }
            }
            acc += term;
        }
        *gx = acc as f64;
    }
    GTable { n, values }
}

fn half_integer_cosine(k: i64) -> i64 {
    // cos(kπ/2) over the integers
    match k.rem_euclid(4) {
        0 => 1,
        2 => -1,
        _ => 0,
    }
}

/// Mermin-type weight table: √(2^{n+1})·cos[(π/2)·Σx] for odd n,
/// √(2^n)·cos[(π/2)·Σx] for even n. Entries are exact integers supported
/// on the even-weight settings.
pub fn mermin_g(n: usize) -> Result<GTable> {
    if n < 2 || n > crate::qsim::MAX_PARTIES {
        return Err(Error::PartyCountOutOfRange {
            n,
            min: 2,
            max: crate::qsim::MAX_PARTIES,
        });
    }
    // √(2^{n+1}) for odd n and √(2^n) for even n are both powers of two
    let magnitude = if n % 2 == 1 {
        1i64 << ((n + 1) / 2)
    } else {
        1i64 << (n / 2)
    };
    let dim = 1usize << n;
    let values = (0..dim)
        .map(|x| (magnitude * half_integer_cosine(x.count_ones() as i64)) as f64)
        .collect();
    Ok(GTable { n, values })
}

/// Ardehali-type weight table for even n:
/// √(2^{n+1})·cos[(π/2)·Σx + π/4]. Every entry is ±2^{n/2} exactly.
pub fn ardehali_g(n: usize) -> Result<GTable> {
    if n < 2 || n > crate::qsim::MAX_PARTIES {
        return Err(Error::PartyCountOutOfRange {
            n,
            min: 2,
            max: crate::qsim::MAX_PARTIES,
        });
    }
    if n % 2 != 0 {
        return Err(Error::OddPartyCount {
            context: "the Ardehali weight table",
            n,
        });
    }
    // √(2^{n+1})·cos(kπ/2 + π/4) = 2^{n/2}·(cos(kπ/2) − sin(kπ/2))
    let magnitude = 1i64 << (n / 2);
    let dim = 1usize << n;
    let values = (0..dim)
        .map(|x| {
            let k = x.count_ones() as i64;
            let c = half_integer_cosine(k);
            let s = half_integer_cosine(k - 1); // sin(kπ/2) = cos((k−1)π/2)
            (magnitude * (c - s)) as f64
        })
        .collect();
    Ok(GTable { n, values })
}

/// Sign function generating [`mermin_g`] for odd n:
/// S(s) = √2·cos[(Σs)·π/4], which is ±1 exactly when Σs is odd.
pub fn mermin_sign_function(n: usize) -> Result<SignFunction> {
    if n % 2 == 0 {
        return Err(Error::EvenPartyCount {
            context: "the Mermin sign function",
            n,
        });
    }
    SignFunction::from_fn(n, |s| {
        let sum: i64 = s.iter().map(|&v| v as i64).sum();
        // √2·cos(mπ/4) for odd m is ±1: +1 at m ≡ ±1 (mod 8)
        match sum.rem_euclid(8) {
            1 | 7 => 1,
            _ => -1,
        }
    })
}

/// Sign function generating [`ardehali_g`] for even n:
/// S(s) = √2·cos[π/4 + (Σs)·π/4], which is ±1 exactly when Σs is even.
pub fn ardehali_sign_function(n: usize) -> Result<SignFunction> {
    if n % 2 != 0 {
        return Err(Error::OddPartyCount {
            context: "the Ardehali sign function",
            n,
        });
    }
    SignFunction::from_fn(n, |s| {
        let sum: i64 = s.iter().map(|&v| v as i64).sum();
        // √2·cos(π/4 + mπ/4) for even m: +1 at m ≡ 0, 6 (mod 8)
        match sum.rem_euclid(8) {
            0 | 6 => 1,
            _ => -1,
        }
    })
}

/// Exact classical optimum and one strategy attaining it.
#[derive(Debug, Clone)]
pub struct LhvBound {
    pub bound: f64,
    pub strategy: DeterministicStrategy,
}

/// Maximizes Σ_x g(x)·Π_p a_p(x_p) over all 4^n deterministic strategies.
///
/// Uses exact integer arithmetic when the table is integral. Ties break
/// toward the lowest strategy index, so parallel and sequential scans of
/// the strategy space give identical results.
pub fn lhv_bound(g: &GTable) -> Result<LhvBound> {
    lhv_bound_with_cap(g, DEFAULT_LHV_CAP)
}

pub fn lhv_bound_with_cap(g: &GTable, cap: usize) -> Result<LhvBound> {
    let n = g.n();
    if n > cap {
        return Err(Error::EnumerationCapExceeded { n, cap });
    }
    let dim = 1usize << n;
    let strategies = 1u64 << (2 * n);

    if let Some(ints) = g.integer_values() {
        let mut best: i64 = i64::MIN;
        let mut best_index = 0u64;
        for k in 0..strategies {
            let strategy = DeterministicStrategy::from_index(n, k);
            let mut score = 0i64;
            for x in 0..dim {
                let gx = ints[x];
                if gx != 0 {
                    score += gx * strategy.product_for(x) as i64;
                }
            }
            if score > best {
                best = score;
                best_index = k;
            }
        }
        Ok(LhvBound {
            bound: best as f64,
            strategy: DeterministicStrategy::from_index(n, best_index),
        })
    } else {
        let mut best = f64::NEG_INFINITY;
        let mut best_index = 0u64;
        for k in 0..strategies {
            let strategy = DeterministicStrategy::from_index(n, k);
            let mut score = 0.0f64;
            for x in 0..dim {
                let gx = g.value(x);
                if gx != 0.0 {
                    score += gx * strategy.product_for(x) as f64;
                }
            }
            if score > best {
                best = score;
                best_index = k;
            }
        }
        Ok(LhvBound {
            bound: best,
            strategy: DeterministicStrategy::from_index(n, best_index),
        })
    }
}

/// Left-hand side of the Bell inequality: Σ_x g(x)·E(x).
pub fn bell_lhs(g: &GTable, tensor: &CorrelationTensor) -> Result<f64> {
    if g.n() != tensor.n() {
        return Err(Error::DimensionMismatch {
            context: "correlation tensor",
            expected: g.n(),
            found: tensor.n(),
        });
    }
    Ok(g
        .values()
        .iter()
        .zip(tensor.values())
        .map(|(gv, ev)| gv * ev)
        .sum())
}

/// Outcome of testing a correlation tensor against an inequality.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Violation {
    pub violated: bool,
    /// lhs − bound; the boundary lhs = bound counts as no violation.
    pub margin: f64,
    pub lhs: f64,
    pub bound: f64,
}

pub fn violated(ineq: &BellInequality, tensor: &CorrelationTensor) -> Result<Violation> {
    let lhs = bell_lhs(ineq.g(), tensor)?;
    let bound = ineq.classical_bound();
    Ok(Violation {
        violated: lhs > bound,
        margin: lhs - bound,
        lhs,
        bound,
    })
}

/// Result of a settings search.
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub settings: MeasurementSettings,
    /// Best Σ g·E found; a lower bound on the quantum maximum for the state.
    pub value: f64,
    pub converged: bool,
}

const MAX_SWEEPS: usize = 500;

/// Maximizes Σ_x g(x)·E(x) over all 2n Bloch vectors by coordinate ascent
/// with random restarts.
///
/// The expression is linear in each single Bloch vector, so the
/// per-coordinate subproblem is solved exactly by normalizing its gradient;
/// every sweep is monotone. Restart 0 starts from the x/y equatorial pair,
/// the rest from uniformly random unit vectors drawn from `rng`.
pub fn optimize_settings<R: Rng + ?Sized>(
    state: &PureState,
    g: &GTable,
    restarts: usize,
    tolerance: f64,
    rng: &mut R,
) -> Result<OptimizeOutcome> {
    if state.n() != g.n() {
        return Err(Error::DimensionMismatch {
            context: "weight table",
            expected: state.n(),
            found: g.n(),
        });
    }
    let n = state.n();
    let mut best: Option<OptimizeOutcome> = None;

    for restart in 0..restarts.max(1) {
        let mut settings = if restart == 0 {
            MeasurementSettings::new(vec![
                [BlochObservable::x_axis(), BlochObservable::y_axis()];
                n
            ])?
        } else {
            let pairs: Vec<[BlochObservable; 2]> = (0..n)
                .map(|_| [random_unit(rng), random_unit(rng)])
                .collect();
            MeasurementSettings::new(pairs)?
        };

        let mut value = bell_lhs(g, &correlation_tensor(state, &settings, 1.0)?)?;
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let previous = value;
            for party in 0..n {
                for choice in 0..2 {
                    let w = objective_gradient(state, &settings, g, party, choice)?;
                    let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
                    if norm > 1e-14 {
                        settings.set_observable(
                            party,
                            choice,
                            BlochObservable::normalized(w)?,
                        );
                    }
                }
            }
            value = bell_lhs(g, &correlation_tensor(state, &settings, 1.0)?)?;
            if value - previous <= tolerance * value.abs().max(1.0) {
                converged = true;
                break;
            }
        }

        let candidate = OptimizeOutcome {
            settings,
            value,
            converged,
        };
        match &best {
            Some(b) if b.value >= candidate.value => {}
            _ => best = Some(candidate),
        }
    }
    Ok(best.expect("at least one restart"))
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> BlochObservable {
    loop {
        let v = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        if let Ok(o) = BlochObservable::normalized(v) {
            return o;
        }
    }
}

/// Gradient of Σ g·E with respect to the Bloch vector of observable
/// (`party`, `choice`): w_k = Σ_{x : x_party = choice} g(x)·E_k(x) where
/// E_k uses the Pauli axis k at that slot.
fn objective_gradient(
    state: &PureState,
    settings: &MeasurementSettings,
    g: &GTable,
    party: usize,
    choice: usize,
) -> Result<[f64; 3]> {
    let n = state.n();
    let dim = 1usize << n;
    let stride = 1usize << (n - 1 - party);
    let mut w = [0.0f64; 3];
    let mut work: Vec<num_complex::Complex64> = Vec::with_capacity(dim);

    for x in 0..dim {
        if party_bit(x, party, n) != choice {
            continue;
        }
        let gx = g.value(x);
        if gx == 0.0 {
            continue;
        }
        work.clear();
        work.extend_from_slice(state.amplitudes());
        for p in 0..n {
            if p != party {
                apply_other(&mut work, n, p, settings.chosen(p, x));
            }
        }
        // Accumulate ⟨ψ|σ_k^{(party)}|χ⟩ for the three Pauli axes in one pass.
        let amps = state.amplitudes();
        let mut gx_x = 0.0;
        let mut gx_y = 0.0;
        let mut gx_z = 0.0;
        let mut base = 0;
        while base < dim {
            for i0 in base..base + stride {
                let i1 = i0 + stride;
                let c0 = amps[i0].conj();
                let c1 = amps[i1].conj();
                let t01 = c0 * work[i1];
                let t10 = c1 * work[i0];
                gx_x += (t01 + t10).re;
                gx_y -= (t10 - t01).im; // ⟨σ_y⟩ = Re(−i·t01 + i·t10)
                gx_z += (c0 * work[i0] - c1 * work[i1]).re;
            }
            base += stride << 1;
        }
        w[0] += gx * gx_x;
        w[1] += gx * gx_y;
        w[2] += gx * gx_z;
    }
    Ok(w)
}

fn apply_other(
    amps: &mut [num_complex::Complex64],
    n: usize,
    party: usize,
    obs: &BlochObservable,
) {
    let m = obs.matrix();
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

/// One member of the WWZB family.
#[derive(Debug, Clone)]
pub struct WwzbMember {
    pub index: u64,
    pub sign: SignFunction,
    pub g: GTable,
    /// True when S(s) = Π_p S_p(s_p), i.e. S is ± a parity function; such
    /// members have single-point support and admit no quantum violation.
    pub factorable: bool,
}

/// Iterates over all 2^(2^n) sign functions and their weight tables.
pub fn enumerate_wwzb(n: usize) -> Result<impl Iterator<Item = WwzbMember>> {
    if n < 1 || n > MAX_WWZB_PARTIES {
        return Err(Error::EnumerationCapExceeded {
            n,
            cap: MAX_WWZB_PARTIES,
        });
    }
    let factorable = factorable_indices(n);
    let total: u64 = 1u64 << (1usize << n);
    Ok((0..total).map(move |index| {
        let sign = SignFunction::from_index(n, index).expect("index in range");
        let g = wwzb_g(&sign);
        WwzbMember {
            index,
            factorable: factorable.contains(&index),
            sign,
            g,
        }
    }))
}

/// Indices of all factorable sign functions: S(s) = ±Π_{p∈T} s_p over the
/// 2^n party subsets T and the global sign.
fn factorable_indices(n: usize) -> HashSet<u64> {
    let mut set = HashSet::new();
    for subset in 0..1usize << n {
        for &global in &[1i8, -1i8] {
            let sf = SignFunction::from_fn(n, |s| {
                let mut v = global;
                for (p, &sp) in s.iter().enumerate() {
                    // party p is in T when bit p (msb-first) of subset is set
                    if party_bit(subset, p, n) == 1 {
                        v *= sp;
                    }
                }
                v
            })
            .expect("±1 by construction");
            set.insert(sf.index());
        }
    }
    set
}
