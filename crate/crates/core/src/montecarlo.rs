//! Monte Carlo transmission of coded packets over erasure channels, decoded
//! by Gaussian elimination over a prime field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analytics::{LayerDistribution, Policy};
use crate::decoding::{random_coded_row, PacketLayout};
use crate::error::ModelError;
use crate::gf::{EchelonBasis, PrimeField};
use crate::scalar::Probability;
use crate::stream::{MetricWeights, SystemConfig};

/// Empirical decoding statistics of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationEstimate {
    /// `layer_counts[u][l]`: trials in which user `u` decoded exactly `l` layers.
    pub layer_counts: Vec<Vec<u64>>,
    pub distributions: Vec<LayerDistribution<f64>>,
    pub eta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub field_order: u64,
}

impl SimulationEstimate {
    /// Mean of the per-user estimates.
    pub fn aggregate(&self) -> f64 {
        self.eta.iter().sum::<f64>() / self.eta.len() as f64
    }
}

/// Simulates `trials` independent transmissions of `policy`.
///
/// Trial `t` draws its coefficients from stream `t * (N + 1)` of a ChaCha8
/// generator keyed by `seed`, and the erasures of user `u` from stream
/// `t * (N + 1) + 1 + u`, so results do not depend on scheduling.
pub fn simulate<P: Probability>(
    config: &SystemConfig<P>,
    policy: &Policy,
    weights: &MetricWeights<P>,
    trials: u64,
    seed: u64,
    field_order: u64,
) -> Result<SimulationEstimate, ModelError> {
    if trials == 0 {
        return Err(ModelError::NoTrials);
    }
    let field = PrimeField::new(field_order)?;
    policy.check(config)?;
    let users = config.stream_count();
    let layers = config.layer_counts();
    let per: Vec<f64> = config.per().iter().map(|p| p.as_f64().clamp(0.0, 1.0)).collect();
    let layout = PacketLayout::new(config);
    let schedule: Vec<_> = policy.iter().flat_map(|(w, n)| std::iter::repeat(w.clone()).take(n as usize)).collect();
    let streams_per_trial = users as u64 + 1;

    let zero = || layers.iter().map(|&l| vec![0u64; l + 1]).collect::<Vec<_>>();
    let layer_counts = (0..trials)
        .into_par_iter()
        .fold(
            || (zero(), EchelonBasis::new(field, layout.columns()), vec![0u64; layout.columns()]),
            |(mut acc, mut basis, mut row), trial| {
                let base = trial * streams_per_trial;
                let mut coef = ChaCha8Rng::seed_from_u64(seed);
                coef.set_stream(base);
                let rows: Vec<Vec<u64>> = schedule
                    .iter()
                    .map(|w| {
                        random_coded_row(&mut coef, &field, &layout, w, &mut row);
                        row.clone()
                    })
                    .collect();
                for (u, &pe) in per.iter().enumerate() {
                    let mut loss = ChaCha8Rng::seed_from_u64(seed);
                    loss.set_stream(base + 1 + u as u64);
                    basis.clear();
                    for r in &rows {
                        if !loss.gen_bool(pe) {
                            basis.insert(r);
                        }
                    }
                    acc[u][layout.decoded_layer(&basis, u)] += 1;
                }
                (acc, basis, row)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
            }
            a
        });

    let n = trials as f64;
    let weights = weights.to_f64();
    let mut distributions = Vec::with_capacity(users);
    let mut eta = Vec::with_capacity(users);
    let mut stderr = Vec::with_capacity(users);
    for (u, counts) in layer_counts.iter().enumerate() {
        distributions.push(LayerDistribution::new(counts.iter().map(|&c| c as f64 / n).collect()));
        let credit = |l: usize| weights.credit(u, l);
        let m = counts.iter().enumerate().map(|(l, &c)| c as f64 * credit(l)).sum::<f64>() / n;
        let ss: f64 = counts.iter().enumerate().map(|(l, &c)| c as f64 * (credit(l) - m).powi(2)).sum();
        let se = if trials > 1 { (ss / (n - 1.0)).sqrt() / n.sqrt() } else { f64::INFINITY };
        eta.push(m);
        stderr.push(se);
    }
    Ok(SimulationEstimate { layer_counts, distributions, eta, stderr, trials, seed, field_order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::DEFAULT_FIELD_ORDER;
    use crate::lattice::WindowIndex;

    fn win(ix: &[u16]) -> WindowIndex {
        WindowIndex::new(ix.to_vec()).unwrap()
    }

    #[test]
    fn lossless_saturation_is_certain() {
        let c = SystemConfig::from_raw(vec![vec![2, 1], vec![1]], vec![0.0, 0.0], 4).unwrap();
        let p = Policy::new().with(win(&[2, 1]), 4);
        let est = simulate(&c, &p, &MetricWeights::throughput(&c), 200, 3, DEFAULT_FIELD_ORDER).unwrap();
        assert_eq!(est.eta, vec![1.0, 1.0]);
        assert_eq!(est.stderr, vec![0.0, 0.0]);
        for d in &est.distributions {
            assert_eq!(d.sum(), 1.0);
        }
    }

    #[test]
    fn two_copies_of_one_packet() {
        let c = SystemConfig::from_raw(vec![vec![1]], vec![0.5], 2).unwrap();
        let p = Policy::new().with(win(&[1]), 2);
        let est = simulate(&c, &p, &MetricWeights::throughput(&c), 100_000, 11, DEFAULT_FIELD_ORDER).unwrap();
        assert!((est.eta[0] - 0.75).abs() <= 3.0 * est.stderr[0]);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let c = SystemConfig::from_raw(vec![vec![1, 1], vec![2]], vec![0.3, 0.2], 5).unwrap();
        let p = Policy::new().with(win(&[1, 0]), 2).with(win(&[2, 1]), 3);
        let w = MetricWeights::throughput(&c);
        let a = simulate(&c, &p, &w, 500, 42, 65_537).unwrap();
        let b = simulate(&c, &p, &w, 500, 42, 65_537).unwrap();
        assert_eq!(a, b);
        let other = simulate(&c, &p, &w, 500, 43, 65_537).unwrap();
        assert_ne!(a.layer_counts, other.layer_counts);
    }

    #[test]
    fn single_trial_has_unbounded_error() {
        let c = SystemConfig::from_raw(vec![vec![1]], vec![0.5], 1).unwrap();
        let p = Policy::new().with(win(&[1]), 1);
        let est = simulate(&c, &p, &MetricWeights::throughput(&c), 1, 0, 2).unwrap();
        assert!(est.stderr[0].is_infinite());
    }

    #[test]
    fn invalid_inputs() {
        let c = SystemConfig::from_raw(vec![vec![1]], vec![0.5], 1).unwrap();
        let p = Policy::new().with(win(&[1]), 1);
        let w = MetricWeights::throughput(&c);
        assert!(matches!(simulate(&c, &p, &w, 10, 0, 15), Err(ModelError::NotPrime(15))));
        assert!(matches!(simulate(&c, &p, &w, 0, 0, 7), Err(ModelError::NoTrials)));
        assert!(matches!(simulate(&c, &Policy::new(), &w, 10, 0, 7), Err(ModelError::BudgetMismatch { .. })));
    }
}
