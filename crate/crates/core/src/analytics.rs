//! Exact layer-decoding probabilities and throughput metrics of a policy.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::decoding::{Reception, SweepDecoder};
use crate::error::ModelError;
use crate::lattice::{WindowIndex, WindowSet};
use crate::scalar::Probability;
use crate::stream::{MetricWeights, SystemConfig};

/// Coded transmissions per window, fixed before sending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Policy {
    counts: BTreeMap<WindowIndex, u32>,
}

impl Policy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a policy from counts aligned with `windows`.
    pub fn from_counts(windows: &WindowSet, counts: &[u32]) -> Self {
        assert_eq!(windows.len(), counts.len());
        let mut p = Self::new();
        for (w, &c) in windows.iter().zip(counts) {
            p.set(w.clone(), c);
        }
        p
    }

    pub fn set(&mut self, w: WindowIndex, count: u32) {
        if count == 0 {
            self.counts.remove(&w);
        } else {
            self.counts.insert(w, count);
        }
    }

    pub fn with(mut self, w: WindowIndex, count: u32) -> Self {
        self.set(w, count);
        self
    }

    pub fn get(&self, w: &WindowIndex) -> u32 {
        self.counts.get(w).copied().unwrap_or(0)
    }

    /// Windows with at least one transmission, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&WindowIndex, u32)> {
        self.counts.iter().map(|(w, &c)| (w, c))
    }

    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    /// Counts aligned with `windows`, or `None` if the policy uses a window
    /// outside the set.
    pub fn aligned(&self, windows: &WindowSet) -> Option<Vec<u32>> {
        let mut out = vec![0; windows.len()];
        for (w, c) in self.iter() {
            out[windows.position(w)?] = c;
        }
        Some(out)
    }

    pub fn check<P: Probability>(&self, config: &SystemConfig<P>) -> Result<(), ModelError> {
        for w in self.counts.keys() {
            w.check(config)?;
        }
        if self.total() != config.budget() {
            return Err(ModelError::BudgetMismatch { expected: config.budget(), found: self.total() });
        }
        Ok(())
    }
}

/// `l1.l2...lN:count` pairs joined by `;`. The empty policy prints as an
/// empty string.
impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (j, (w, c)) in self.iter().enumerate() {
            if j > 0 {
                f.write_str(";")?;
            }
            write!(f, "{w}:{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Policy {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Policy::new();
        for item in s.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            let bad = || ModelError::PolicySyntax(item.to_string());
            let (w, c) = item.split_once(':').ok_or_else(bad)?;
            let w: WindowIndex = w.parse().map_err(|_| bad())?;
            let c: u32 = c.trim().parse().map_err(|_| bad())?;
            if p.counts.contains_key(&w) {
                return Err(bad());
            }
            p.set(w, c);
        }
        Ok(p)
    }
}

/// `probs[l]` = probability that the highest decodable layer is exactly `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerDistribution<P = f64> {
    probs: Vec<P>,
}

impl<P: Probability> LayerDistribution<P> {
    pub fn new(probs: Vec<P>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[P] {
        &self.probs
    }

    pub fn layer_count(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn get(&self, layer: usize) -> &P {
        &self.probs[layer]
    }

    pub fn sum(&self) -> P {
        self.probs.iter().cloned().fold(P::zero(), |a, b| a + b)
    }

    /// Probability of decoding at least `layer`.
    pub fn at_least(&self, layer: usize) -> P {
        self.probs[layer..].iter().cloned().fold(P::zero(), |a, b| a + b)
    }
}

/// Pairwise (cascade) summation with a fixed association order.
#[derive(Debug, Clone)]
pub struct PairwiseSum<P> {
    stack: Vec<(u32, P)>,
}

impl<P: Probability> Default for PairwiseSum<P> {
    fn default() -> Self {
        Self { stack: Vec::new() }
    }
}

impl<P: Probability> PairwiseSum<P> {
    pub fn add(&mut self, x: P) {
        let mut level = 0;
        let mut acc = x;
        while let Some((l, _)) = self.stack.last() {
            if *l != level {
                break;
            }
            let (_, v) = self.stack.pop().expect("nonempty");
            acc = v + acc;
            level += 1;
        }
        self.stack.push((level, acc));
    }

    pub fn total(&self) -> P {
        self.stack.iter().rev().fold(P::zero(), |a, (_, v)| v.clone() + a)
    }
}

/// Probability that a user with erasure probability `pe` receives exactly
/// `reception` when `policy` is sent.
pub fn reception_probability<P: Probability>(
    reception: &Reception,
    policy: &Policy,
    pe: &P,
) -> Result<P, ModelError> {
    for (w, r) in reception.iter() {
        let n = policy.get(w);
        if r > n {
            return Err(ModelError::ReceptionExceedsPolicy { window: w.to_string(), received: r, sent: n });
        }
    }
    let success = P::one() - pe.clone();
    Ok(policy
        .iter()
        .fold(P::one(), |acc, (w, n)| acc * P::binomial_pmf(n, reception.get(w), &success)))
}

/// Layer distributions of every user, by enumerating all receptions of
/// `policy` in canonical order.
pub fn layer_distributions<P: Probability>(
    config: &SystemConfig<P>,
    policy: &Policy,
) -> Result<Vec<LayerDistribution<P>>, ModelError> {
    for (w, _) in policy.iter() {
        w.check(config)?;
    }
    let n_users = config.stream_count();
    let layers = config.layer_counts();
    if policy.total() == 0 {
        return Ok(layers
            .iter()
            .map(|&l| {
                let mut probs = vec![P::zero(); l + 1];
                probs[0] = P::one();
                LayerDistribution::new(probs)
            })
            .collect());
    }
    let support = WindowSet::new(config, policy.iter().map(|(w, _)| w.clone()))?;
    let sent = policy.aligned(&support).expect("support");
    let decoder = SweepDecoder::new(config, &support);

    // pmf[u][j][r]
    let pmf: Vec<Vec<Vec<P>>> = config
        .per()
        .iter()
        .map(|pe| {
            let success = P::one() - pe.clone();
            sent.iter()
                .map(|&n| (0..=n).map(|r| P::binomial_pmf(n, r, &success)).collect())
                .collect()
        })
        .collect();

    let mut sums: Vec<Vec<PairwiseSum<P>>> =
        layers.iter().map(|&l| (0..=l).map(|_| PairwiseSum::default()).collect()).collect();
    let mut received = vec![0u32; sent.len()];
    let mut work = vec![0u32; sent.len()];
    let mut prefix = vec![0usize; n_users];
    let mut decoded = vec![0usize; n_users];
    loop {
        decoder.decode_into(&received, &mut work, &mut prefix, &mut decoded);
        for u in 0..n_users {
            let p = received
                .iter()
                .enumerate()
                .fold(P::one(), |acc, (j, &r)| acc * pmf[u][j][r as usize].clone());
            sums[u][decoded[u]].add(p);
        }
        // odometer over receptions, last window fastest
        let mut j = sent.len();
        loop {
            if j == 0 {
                return Ok(sums
                    .into_iter()
                    .map(|s| LayerDistribution::new(s.iter().map(PairwiseSum::total).collect()))
                    .collect());
            }
            j -= 1;
            if received[j] < sent[j] {
                received[j] += 1;
                break;
            }
            received[j] = 0;
        }
    }
}

/// Distribution of the highest decodable layer of user `user` (0-based).
pub fn layer_distribution<P: Probability>(
    user: usize,
    config: &SystemConfig<P>,
    policy: &Policy,
) -> Result<LayerDistribution<P>, ModelError> {
    if user >= config.stream_count() {
        return Err(ModelError::UserOutOfRange { user: user + 1, streams: config.stream_count() });
    }
    Ok(layer_distributions(config, policy)?.swap_remove(user))
}

/// Weighted sum of the layer probabilities, layer 0 excluded.
pub fn user_metric<P: Probability>(dist: &LayerDistribution<P>, weights: &[P]) -> Result<P, ModelError> {
    if weights.len() != dist.layer_count() {
        return Err(ModelError::LengthMismatch { expected: weights.len(), found: dist.layer_count() });
    }
    Ok(weights
        .iter()
        .zip(&dist.probs()[1..])
        .fold(P::zero(), |acc, (a, p)| acc + a.clone() * p.clone()))
}

/// Arithmetic mean of per-user metrics.
pub fn mean<P: Probability>(values: &[P]) -> P {
    let n = P::from_ratio(values.len() as u64, 1);
    values.iter().cloned().fold(P::zero(), |a, b| a + b) / n
}

/// Per-user metrics of `policy`.
pub fn user_metrics<P: Probability>(
    config: &SystemConfig<P>,
    policy: &Policy,
    weights: &MetricWeights<P>,
) -> Result<Vec<P>, ModelError> {
    layer_distributions(config, policy)?
        .iter()
        .enumerate()
        .map(|(i, d)| user_metric(d, weights.stream(i)))
        .collect()
}

/// Mean metric over all users.
pub fn aggregate_metric<P: Probability>(
    config: &SystemConfig<P>,
    policy: &Policy,
    weights: &MetricWeights<P>,
) -> Result<P, ModelError> {
    Ok(mean(&user_metrics(config, policy, weights)?))
}
