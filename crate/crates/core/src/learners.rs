//! Bandit learners for the investor.
//!
//! A learner sees the number of arms and the horizon up front, then one
//! normalized utility per round for the arm it pulled. Nothing else about
//! the environment reaches it.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{domain, Error, Result};

/// Weights are rescaled once the largest exceeds this.
pub const WEIGHT_RESCALE_AT: f64 = 1e100;

pub trait Learner: Send {
    fn id(&self) -> String;

    fn arms(&self) -> usize;

    /// Arm to pull at round `t` (1-based).
    fn choose(&mut self, t: usize, rng: &mut dyn RngCore) -> usize;

    /// Bandit feedback for round `t`: the pulled arm and its utility in [0, 1].
    fn observe(&mut self, t: usize, arm: usize, utility: f64) -> Result<()>;
}

fn check_feedback(arms: usize, arm: usize, utility: f64) -> Result<()> {
    if arm >= arms {
        return Err(Error::Contract(format!("arm {arm} out of range for {arms} arms")));
    }
    if !(0.0..=1.0).contains(&utility) {
        return Err(Error::Contract(format!(
            "utility {utility} is outside [0, 1]; normalize before feeding the learner"
        )));
    }
    Ok(())
}

/// Inverse-CDF draw from `probs`.
pub fn sample_index(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// EXP3 with the fixed exploration rate
/// `γ = min{1, √(K ln K / ((e − 1) T))}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3 {
    weights: Vec<f64>,
    gamma: f64,
}

impl Exp3 {
    /// All weights 1; `γ` from the arm count and horizon.
    pub fn new(arms: usize, horizon: usize) -> Result<Self> {
        if arms == 0 {
            return Err(domain("EXP3 needs at least one arm"));
        }
        if horizon == 0 {
            return Err(domain("EXP3 needs a horizon of at least one round"));
        }
        Ok(Self {
            weights: vec![1.0; arms],
            gamma: Self::exploration_rate(arms, horizon),
        })
    }

    pub fn exploration_rate(arms: usize, horizon: usize) -> f64 {
        let k = arms as f64;
        let rate = (k * k.ln() / ((std::f64::consts::E - 1.0) * horizon as f64)).sqrt();
        rate.min(1.0)
    }

    /// Explicit weights and rate, for tests and replays.
    pub fn from_parts(weights: Vec<f64>, gamma: f64) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(domain("EXP3 weights must be finite and strictly positive"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(domain("gamma must lie in [0, 1]"));
        }
        Ok(Self { weights, gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(1 − γ)·q / Σq + γ / K`.
    pub fn probs(&self) -> Vec<f64> {
        let k = self.weights.len() as f64;
        let total: f64 = self.weights.iter().sum();
        self.weights
            .iter()
            .map(|w| (1.0 - self.gamma) * w / total + self.gamma / k)
            .collect()
    }

    /// Multiplies the pulled arm's weight by `exp(γ·u / (K·p_arm))`.
    pub fn update(&mut self, arm: usize, utility: f64) -> Result<()> {
        check_feedback(self.weights.len(), arm, utility)?;
        let k = self.weights.len() as f64;
        let p = self.probs()[arm];
        self.weights[arm] *= (self.gamma * utility / (k * p)).exp();
        let max = self.weights.iter().copied().fold(0.0, f64::max);
        if max > WEIGHT_RESCALE_AT {
            for w in &mut self.weights {
                *w = (*w / max).max(f64::MIN_POSITIVE);
            }
        }
        Ok(())
    }

    pub fn updated(&self, arm: usize, utility: f64) -> Result<Self> {
        let mut next = self.clone();
        next.update(arm, utility)?;
        Ok(next)
    }
}

impl Learner for Exp3 {
    fn id(&self) -> String {
        "exp3".into()
    }

    fn arms(&self) -> usize {
        self.weights.len()
    }

    fn choose(&mut self, _t: usize, rng: &mut dyn RngCore) -> usize {
        sample_index(&self.probs(), rng)
    }

    fn observe(&mut self, _t: usize, arm: usize, utility: f64) -> Result<()> {
        self.update(arm, utility)
    }
}

#[derive(Debug, Clone)]
pub struct FixedArm {
    arms: usize,
    arm: usize,
}

impl FixedArm {
    pub fn new(arms: usize, arm: usize) -> Result<Self> {
        if arm >= arms {
            return Err(domain(format!("fixed arm {arm} out of range for {arms} arms")));
        }
        Ok(Self { arms, arm })
    }
}

impl Learner for FixedArm {
    fn id(&self) -> String {
        format!("fixed:{}", self.arm)
    }
    fn arms(&self) -> usize {
        self.arms
    }
    fn choose(&mut self, _t: usize, _rng: &mut dyn RngCore) -> usize {
        self.arm
    }
    fn observe(&mut self, _t: usize, arm: usize, utility: f64) -> Result<()> {
        check_feedback(self.arms, arm, utility)
    }
}

#[derive(Debug, Clone)]
pub struct UniformRandom {
    arms: usize,
}

impl UniformRandom {
    pub fn new(arms: usize) -> Result<Self> {
        if arms == 0 {
            return Err(domain("need at least one arm"));
        }
        Ok(Self { arms })
    }
}

impl Learner for UniformRandom {
    fn id(&self) -> String {
        "uniform".into()
    }
    fn arms(&self) -> usize {
        self.arms
    }
    fn choose(&mut self, _t: usize, rng: &mut dyn RngCore) -> usize {
        rng.random_range(0..self.arms)
    }
    fn observe(&mut self, _t: usize, arm: usize, utility: f64) -> Result<()> {
        check_feedback(self.arms, arm, utility)
    }
}

#[derive(Debug, Clone, Default)]
struct Means {
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl Means {
    fn new(arms: usize) -> Self {
        Self {
            counts: vec![0; arms],
            sums: vec![0.0; arms],
        }
    }

    fn record(&mut self, arm: usize, utility: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += utility;
    }

    fn leader(&self) -> usize {
        let mean = |a: usize| {
            if self.counts[a] == 0 {
                0.0
            } else {
                self.sums[a] / self.counts[a] as f64
            }
        };
        let mut best = 0;
        for a in 1..self.counts.len() {
            if mean(a) > mean(best) {
                best = a;
            }
        }
        best
    }

    fn first_unplayed(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c == 0)
    }
}

/// Explores uniformly with probability `min{1, K/t}`, otherwise plays the
/// best empirical mean.
#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    means: Means,
}

impl EpsilonGreedy {
    pub fn new(arms: usize) -> Result<Self> {
        if arms == 0 {
            return Err(domain("need at least one arm"));
        }
        Ok(Self {
            means: Means::new(arms),
        })
    }

    pub fn epsilon(&self, t: usize) -> f64 {
        (self.means.counts.len() as f64 / t.max(1) as f64).min(1.0)
    }
}

impl Learner for EpsilonGreedy {
    fn id(&self) -> String {
        "eps-greedy".into()
    }
    fn arms(&self) -> usize {
        self.means.counts.len()
    }
    fn choose(&mut self, t: usize, rng: &mut dyn RngCore) -> usize {
        if rng.random::<f64>() < self.epsilon(t) {
            rng.random_range(0..self.arms())
        } else {
            self.means.leader()
        }
    }
    fn observe(&mut self, _t: usize, arm: usize, utility: f64) -> Result<()> {
        check_feedback(self.arms(), arm, utility)?;
        self.means.record(arm, utility);
        Ok(())
    }
}

/// Pulls every arm once in index order, then the best empirical mean.
#[derive(Debug, Clone)]
pub struct FollowTheLeader {
    means: Means,
}

impl FollowTheLeader {
    pub fn new(arms: usize) -> Result<Self> {
        if arms == 0 {
            return Err(domain("need at least one arm"));
        }
        Ok(Self {
            means: Means::new(arms),
        })
    }
}

impl Learner for FollowTheLeader {
    fn id(&self) -> String {
        "ftl".into()
    }
    fn arms(&self) -> usize {
        self.means.counts.len()
    }
    fn choose(&mut self, _t: usize, _rng: &mut dyn RngCore) -> usize {
        self.means.first_unplayed().unwrap_or_else(|| self.means.leader())
    }
    fn observe(&mut self, _t: usize, arm: usize, utility: f64) -> Result<()> {
        check_feedback(self.arms(), arm, utility)?;
        self.means.record(arm, utility);
        Ok(())
    }
}

/// Learner selection by id: `exp3`, `uniform`, `eps-greedy`, `ftl`, `fixed:<k>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerSpec {
    Exp3,
    Uniform,
    EpsilonGreedy,
    FollowTheLeader,
    Fixed(usize),
}

impl FromStr for LearnerSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exp3" => LearnerSpec::Exp3,
            "uniform" => LearnerSpec::Uniform,
            "eps-greedy" => LearnerSpec::EpsilonGreedy,
            "ftl" => LearnerSpec::FollowTheLeader,
            other => match other.strip_prefix("fixed:").map(str::parse::<usize>) {
                Some(Ok(k)) => LearnerSpec::Fixed(k),
                _ => return Err(Error::UnknownId(format!("learner {other}"))),
            },
        })
    }
}

impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerSpec::Exp3 => f.write_str("exp3"),
            LearnerSpec::Uniform => f.write_str("uniform"),
            LearnerSpec::EpsilonGreedy => f.write_str("eps-greedy"),
            LearnerSpec::FollowTheLeader => f.write_str("ftl"),
            LearnerSpec::Fixed(k) => write!(f, "fixed:{k}"),
        }
    }
}

impl LearnerSpec {
    pub fn build(&self, arms: usize, horizon: usize) -> Result<Box<dyn Learner>> {
        Ok(match *self {
            LearnerSpec::Exp3 => Box::new(Exp3::new(arms, horizon)?),
            LearnerSpec::Uniform => Box::new(UniformRandom::new(arms)?),
            LearnerSpec::EpsilonGreedy => Box::new(EpsilonGreedy::new(arms)?),
            LearnerSpec::FollowTheLeader => Box::new(FollowTheLeader::new(arms)?),
            LearnerSpec::Fixed(k) => Box::new(FixedArm::new(arms, k)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn gamma_from_formula() {
        let g = Exp3::new(2, 100).unwrap().gamma();
        let expect = (2.0 * 2f64.ln() / (1.718281828459045 * 100.0)).sqrt();
        assert!((g - expect).abs() < 1e-15);
        assert!((g - 0.0898).abs() < 1e-4);
    }

    #[test]
    fn gamma_clips_at_one() {
        let t = (16.0 * 16f64.ln() / (std::f64::consts::E - 1.0)).floor() as usize;
        assert_eq!(Exp3::new(16, t).unwrap().gamma(), 1.0);
        assert!(Exp3::new(16, t + 2).unwrap().gamma() < 1.0);
    }

    #[test]
    fn single_arm_always_chosen() {
        let mut l = Exp3::new(1, 50).unwrap();
        assert_eq!(l.probs(), vec![1.0]);
        let mut rng = seeded(0);
        for t in 1..20 {
            assert_eq!(l.choose(t, &mut rng), 0);
            l.observe(t, 0, 0.7).unwrap();
        }
    }

    #[test]
    fn zero_arms_rejected() {
        assert!(Exp3::new(0, 10).is_err());
        assert!(LearnerSpec::Fixed(3).build(2, 10).is_err());
    }

    #[test]
    fn initial_probs_uniform() {
        for k in 1..6 {
            let p = Exp3::new(k, 1000).unwrap().probs();
            assert!(p.iter().all(|x| (x - 1.0 / k as f64).abs() < 1e-15));
        }
    }

    #[test]
    fn probs_from_explicit_weights() {
        let e = std::f64::consts::E;
        let p = Exp3::from_parts(vec![e, 1.0], 0.0).unwrap().probs();
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert_eq!(Exp3::from_parts(vec![e, 1.0], 1.0).unwrap().probs(), vec![0.5, 0.5]);
    }

    #[test]
    fn update_factor() {
        let l = Exp3::from_parts(vec![1.0, 1.0], 0.1).unwrap();
        let next = l.updated(0, 1.0).unwrap();
        assert!((next.weights()[0] - 0.1f64.exp()).abs() < 1e-15);
        assert_eq!(next.weights()[1], 1.0);
        assert_eq!(l.updated(1, 0.0).unwrap(), l);
    }

    #[test]
    fn three_round_replay() {
        let gamma = 0.3;
        let mut l = Exp3::from_parts(vec![1.0; 3], gamma).unwrap();
        let mut w = [1.0f64; 3];
        for (arm, u) in [(0usize, 0.5), (2, 1.0), (0, 0.25)] {
            let total: f64 = w.iter().sum();
            let p = (1.0 - gamma) * w[arm] / total + gamma / 3.0;
            w[arm] *= (gamma * u / (3.0 * p)).exp();
            l.update(arm, u).unwrap();
        }
        for (got, want) in l.weights().iter().zip(w) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn out_of_range_utility_is_a_contract_violation() {
        let mut l = Exp3::new(2, 10).unwrap();
        assert!(matches!(l.update(0, 1.5), Err(Error::Contract(_))));
        assert!(matches!(l.update(0, -0.1), Err(Error::Contract(_))));
        assert!(matches!(l.update(2, 0.5), Err(Error::Contract(_))));
        let mut u = UniformRandom::new(2).unwrap();
        assert!(u.observe(1, 0, 2.0).is_err());
    }

    #[test]
    fn weights_rescale_without_changing_probs() {
        let mut l = Exp3::from_parts(vec![0.9e100, 0.9e100], 0.5).unwrap();
        let factor = (0.5f64 / (2.0 * 0.5)).exp();
        let expect = Exp3::from_parts(vec![0.9 * factor, 0.9], 0.5).unwrap().probs();
        l.update(0, 1.0).unwrap();
        assert_eq!(l.weights()[0], 1.0);
        for (got, want) in l.probs().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12);
        }
        for _ in 0..2000 {
            l.update(0, 1.0).unwrap();
        }
        assert!(l.weights().iter().all(|w| w.is_finite() && *w > 0.0));
        assert!((l.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ids_round_trip() {
        for id in ["exp3", "uniform", "eps-greedy", "ftl", "fixed:3"] {
            let spec: LearnerSpec = id.parse().unwrap();
            assert_eq!(spec.to_string(), id);
            assert_eq!(spec.build(4, 10).unwrap().id(), id);
        }
        assert!("ucb".parse::<LearnerSpec>().is_err());
        assert!("fixed:x".parse::<LearnerSpec>().is_err());
    }

    #[test]
    fn ftl_tries_every_arm_first() {
        let mut l = FollowTheLeader::new(3).unwrap();
        let mut rng = seeded(1);
        let mut pulled = vec![];
        for (t, u) in [(1, 0.2), (2, 0.9), (3, 0.5)] {
            let a = l.choose(t, &mut rng);
            pulled.push(a);
            l.observe(t, a, u).unwrap();
        }
        assert_eq!(pulled, vec![0, 1, 2]);
        assert_eq!(l.choose(4, &mut rng), 1);
    }

    /// Stationary Bernoulli arms with means 0.75 and 0.25; realized regret
    /// against the best arm in hindsight.
    fn bernoulli_regret(spec: LearnerSpec, seed: u64, horizon: usize) -> f64 {
        let mut rng = seeded(seed);
        let mut l = spec.build(2, horizon).unwrap();
        let means = [0.75, 0.25];
        let (mut cum, mut got) = ([0.0; 2], 0.0);
        for t in 1..=horizon {
            let u: Vec<f64> = means.iter().map(|m| (rng.random::<f64>() < *m) as u8 as f64).collect();
            let a = l.choose(t, &mut rng);
            l.observe(t, a, u[a]).unwrap();
            cum[0] += u[0];
            cum[1] += u[1];
            got += u[a];
        }
        cum[0].max(cum[1]) - got
    }

    #[test]
    fn epsilon_greedy_beats_uniform() {
        let mean = |spec| (0..50).map(|s| bernoulli_regret(spec, s, 5000)).sum::<f64>() / 50.0;
        let eg = mean(LearnerSpec::EpsilonGreedy);
        let un = mean(LearnerSpec::Uniform);
        assert!(eg < un, "eps-greedy {eg} vs uniform {un}");
    }

    proptest! {
        #[test]
        fn probs_are_a_distribution_with_floor(
            weights in proptest::collection::vec(1e-6f64..1e6, 1..10),
            gamma in 0.0f64..=1.0,
        ) {
            let l = Exp3::from_parts(weights.clone(), gamma).unwrap();
            let p = l.probs();
            let k = weights.len() as f64;
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for x in p {
                prop_assert!(x >= gamma / k - 1e-15);
            }
        }

        #[test]
        fn replay_is_deterministic(seed in any::<u64>(), stream in proptest::collection::vec(0.0f64..=1.0, 1..60)) {
            let run = || {
                let mut rng = seeded(seed);
                let mut l = Exp3::new(3, stream.len()).unwrap();
                stream
                    .iter()
                    .enumerate()
                    .map(|(i, &u)| {
                        let a = l.choose(i + 1, &mut rng);
                        l.observe(i + 1, a, u).unwrap();
                        a
                    })
                    .collect::<Vec<_>>()
            };
            prop_assert_eq!(run(), run());
        }
    }
}
