//! Finite Markov reward processes with exact stationary distributions.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vector::{FeatureVector, Transition};

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMrp {
    transitions: DMatrix<f64>,
    rewards: Vec<f64>,
    xi0: Vec<f64>,
    features: DMatrix<f64>,
}

impl FiniteMrp {
    /// Validates and builds an MRP. `features` is n×k, one row per state.
    ///
    /// The chain must be irreducible so that its stationary distribution is
    /// unique. Periodicity is allowed here; use [`FiniteMrp::is_aperiodic`]
    /// where mixing matters.
    pub fn new(transitions: DMatrix<f64>, rewards: Vec<f64>, xi0: Vec<f64>, features: DMatrix<f64>) -> Result<Self> {
        let n = transitions.nrows();
        if n == 0 || transitions.ncols() != n {
            return Err(Error::InvalidMrp(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                n,
                transitions.ncols()
            )));
        }
        if rewards.len() != n || xi0.len() != n || features.nrows() != n {
            return Err(Error::InvalidMrp("rewards, xi0 and feature rows must match the state count".into()));
        }
        for (i, row) in transitions.row_iter().enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidMrp(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidMrp(format!("row {i} sums to {sum}")));
            }
        }
        if xi0.iter().any(|p| !(*p >= 0.0)) || (xi0.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidMrp("initial distribution must be nonnegative and sum to 1".into()));
        }
        if rewards.iter().chain(features.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMrp("rewards and features must be finite".into()));
        }
        let mrp = Self { transitions, rewards, xi0, features };
        if !mrp.is_irreducible() {
            return Err(Error::InvalidMrp("transition graph is not strongly connected".into()));
        }
        Ok(mrp)
    }

    /// Tabular MRP: Φ = I and a uniform initial distribution.
    pub fn tabular(transitions: DMatrix<f64>, rewards: Vec<f64>) -> Result<Self> {
        let n = transitions.nrows();
        Self::new(transitions, rewards, vec![1.0 / n as f64; n], DMatrix::identity(n, n))
    }

    /// The deterministic two-state cycle 0 → 1 → 0.
    pub fn two_state_cycle(rewards: [f64; 2]) -> Self {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        Self::tabular(p, rewards.to_vec()).expect("cycle is a valid MRP")
    }

    pub fn with_features(self, features: DMatrix<f64>) -> Result<Self> {
        Self::new(self.transitions, self.rewards, self.xi0, features)
    }

    pub fn n_states(&self) -> usize {
        self.transitions.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn transitions(&self) -> &DMatrix<f64> {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn xi0(&self) -> &[f64] {
        &self.xi0
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature_row(&self, state: usize) -> FeatureVector {
        self.features.row(state).iter().copied().collect::<Vec<_>>().into()
    }

    fn reachable(&self, from: usize, reverse: bool) -> Vec<bool> {
        let n = self.n_states();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let p = if reverse { self.transitions[(v, u)] } else { self.transitions[(u, v)] };
                if p > 0.0 && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    pub fn is_irreducible(&self) -> bool {
        self.reachable(0, false).iter().all(|s| *s) && self.reachable(0, true).iter().all(|s| *s)
    }

    /// Period of the (irreducible) chain: gcd over edges u→v of level(u) + 1 − level(v).
    pub fn period(&self) -> usize {
        let n = self.n_states();
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        let mut g = 0usize;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.transitions[(u, v)] <= 0.0 {
                    continue;
                }
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else {
                    g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                }
            }
        }
        g
    }

    pub fn is_aperiodic(&self) -> bool {
        self.period() == 1
    }

    /// Irreducible and aperiodic.
    pub fn validate_ergodic(&self) -> Result<()> {
        if !self.is_irreducible() {
            return Err(Error::InvalidMrp("chain is reducible".into()));
        }
        if !self.is_aperiodic() {
            return Err(Error::InvalidMrp(format!("chain has period {}", self.period())));
        }
        Ok(())
    }

    /// ξ∞ solving ξᵀP = ξᵀ, Σξ = 1, by a dense solve with one balance
    /// equation replaced by the normalization.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let n = self.n_states();
        let mut system = self.transitions.transpose() - DMatrix::<f64>::identity(n, n);
        system.row_mut(n - 1).fill(1.0);
        let mut rhs = DVector::<f64>::zeros(n);
        rhs[n - 1] = 1.0;
        let xi = system.lu().solve(&rhs).ok_or_else(|| Error::Singular("stationary distribution system".into()))?;
        Ok(xi.iter().copied().collect())
    }

    /// Iterator over a sampled trajectory: x₀ ~ ξ₀, then P.
    pub fn sampler(&self, seed: u64) -> MrpSampler<'_> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = sample_index(&mut rng, self.xi0.iter().copied());
        MrpSampler { mrp: self, rng, state }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn sample_index(rng: &mut impl Rng, probs: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p > 0.0 {
            last = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

pub struct MrpSampler<'a> {
    mrp: &'a FiniteMrp,
    rng: ChaCha8Rng,
    state: usize,
}

impl MrpSampler<'_> {
    pub fn state(&self) -> usize {
        self.state
    }

    /// Advances one step and returns (xₜ, xₜ₊₁).
    pub fn next_states(&mut self) -> (usize, usize) {
        let from = self.state;
        let to = sample_index(&mut self.rng, self.mrp.transitions.row(from).iter().copied());
        self.state = to;
        (from, to)
    }
}

impl Iterator for MrpSampler<'_> {
    type Item = Transition;

    fn next(&mut self) -> Option<Transition> {
        let (from, to) = self.next_states();
        Some(Transition {
            phi_t: self.mrp.feature_row(from),
            reward: self.mrp.rewards[from],
            phi_next: self.mrp.feature_row(to),
            terminal: false,
        })
    }
}

/// Dense random chain with all transition probabilities positive (hence
/// ergodic), rewards uniform in ±`reward_scale` and tabular features.
pub fn random_chain_mrp(n_states: usize, seed: u64, reward_scale: f64) -> Result<FiniteMrp> {
    if n_states < 2 {
        return Err(Error::InvalidParameter { name: "n_states", reason: format!("must be >= 2, got {n_states}") });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = DMatrix::<f64>::zeros(n_states, n_states);
    for i in 0..n_states {
        for j in 0..n_states {
            // (0, 1]: strictly positive.
            p[(i, j)] = 1.0 - rng.random::<f64>();
        }
        let sum: f64 = p.row(i).sum();
        p.row_mut(i).scale_mut(1.0 / sum);
    }
    let rewards = (0..n_states).map(|_| rng.random_range(-reward_scale..=reward_scale)).collect();
    FiniteMrp::tabular(p, rewards)
}

/// Collects `horizon` transitions of a continuing trajectory.
pub fn mrp_sample_episode(mrp: &FiniteMrp, horizon: usize, seed: u64) -> Result<Vec<Transition>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter { name: "horizon", reason: "must be >= 1".into() });
    }
    Ok(mrp.sampler(seed).take(horizon).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_iteration_stationary(mrp: &FiniteMrp) -> Vec<f64> {
        let n = mrp.n_states();
        let mut xi = DVector::from_element(n, 1.0 / n as f64);
        let pt = mrp.transitions().transpose();
        for _ in 0..10_000 {
            xi = &pt * xi;
        }
        xi.iter().copied().collect()
    }

    #[test]
    fn seeded_construction_is_deterministic() {
        let a = random_chain_mrp(6, 42, 1.0).unwrap();
        let b = random_chain_mrp(6, 42, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_chain_mrp(6, 43, 1.0).unwrap());
    }

    #[test]
    fn rows_sum_to_one() {
        for seed in 0..20 {
            let m = random_chain_mrp(2, seed, 3.0).unwrap();
            for row in m.transitions().row_iter() {
                assert!((row.sum() - 1.0).abs() <= 1e-12);
            }
            assert!(m.rewards().iter().all(|r| r.abs() <= 3.0));
            m.validate_ergodic().unwrap();
        }
    }

    #[test]
    fn stationary_dense_matches_power_iteration() {
        let m = random_chain_mrp(5, 7, 1.0).unwrap();
        let dense = m.stationary_distribution().unwrap();
        let power = power_iteration_stationary(&m);
        for (a, b) in dense.iter().zip(&power) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_reducible_chain() {
        // State 1 is absorbing: 0 cannot be reached from 1.
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 1.0]);
        let err = FiniteMrp::tabular(p, vec![0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidMrp(_)));
    }

    #[test]
    fn rejects_bad_rows() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.5]);
        assert!(FiniteMrp::tabular(p, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn cycle_is_periodic_but_irreducible() {
        let m = FiniteMrp::two_state_cycle([1.0, 0.0]);
        assert_eq!(m.period(), 2);
        assert!(m.validate_ergodic().is_err());
        let xi = m.stationary_distribution().unwrap();
        assert!((xi[0] - 0.5).abs() < 1e-15 && (xi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn horizon_one_gives_one_transition() {
        let m = random_chain_mrp(3, 1, 1.0).unwrap();
        assert_eq!(mrp_sample_episode(&m, 1, 5).unwrap().len(), 1);
        assert!(mrp_sample_episode(&m, 0, 5).is_err());
    }

    #[test]
    fn cycle_alternates_feature_rows() {
        let m = FiniteMrp::two_state_cycle([1.0, 0.0]);
        let eps = mrp_sample_episode(&m, 10, 3).unwrap();
        for w in eps.windows(2) {
            assert_ne!(w[0].phi_t, w[1].phi_t);
            assert_eq!(w[0].phi_next, w[1].phi_t);
            assert!(!w[0].terminal);
        }
        assert_eq!(mrp_sample_episode(&m, 10, 3).unwrap(), eps);
    }

    #[test]
    fn empirical_frequencies_match_stationary() {
        let m = random_chain_mrp(5, 7, 1.0).unwrap();
        let xi = m.stationary_distribution().unwrap();
        let mut counts = [0usize; 5];
        let mut sampler = m.sampler(99);
        let steps = 100_000;
        for _ in 0..steps {
            counts[sampler.next_states().0] += 1;
        }
        let tv: f64 = counts.iter().zip(&xi).map(|(c, p)| (*c as f64 / steps as f64 - p).abs()).sum::<f64>() * 0.5;
        assert!(tv <= 0.01, "total variation {tv}");
    }
}
