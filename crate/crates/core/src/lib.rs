//! Layered multicast with expanding-window network coding.
//!
//! Several scalable streams share one erasure broadcast channel; each
//! user wants the base layers of its own stream. A transmission policy
//! fixes, before sending, how many random linear combinations of each
//! coding window go out. This crate computes the probability that each
//! user decodes each layer, the resulting throughput metrics, the best
//! policies by exhaustive search, and Monte Carlo checks of all of it.
//!
//! The core is generic over the probability scalar: `f64`/`f32` for speed
//! and [`Rational`] for exact results. Aliases for the common choices are
//! exported at the crate root.
//!
//! ```
//! use layercast::{analytics, ExactConfig, ExactWeights, Policy, Rational};
//!
//! let q = |n: i64, d: i64| Rational::new(n.into(), d.into());
//! let config = ExactConfig::from_raw(vec![vec![1]], vec![q(1, 2)], 2)?;
//! let policy: Policy = "1:2".parse()?;
//! let eta = analytics::user_metrics(&config, &policy, &ExactWeights::throughput(&config))?;
//! assert_eq!(eta[0], q(3, 4));
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analytics;
pub mod decoding;
pub mod error;
pub mod gf;
pub mod lattice;
pub mod montecarlo;
pub mod optimizer;
pub mod policy_space;
pub mod scalar;
pub mod stream;

pub use analytics::{
    aggregate_metric, layer_distribution, layer_distributions, mean, reception_probability, user_metric,
    user_metrics, LayerDistribution, Policy,
};
pub use decoding::{highest_decodable_layer, oracle_decodable_layer, Reception, SweepDecoder};
pub use error::{ConfigError, ModelError, WindowError};
pub use gf::{EchelonBasis, PrimeField, DEFAULT_FIELD_ORDER};
pub use lattice::{WindowIndex, WindowSet};
pub use montecarlo::{simulate, SimulationEstimate};
pub use optimizer::{
    enumerate_policies, improvement_sweep, optimize, optimize_up_to, pareto_frontier, uncoded_uep_evaluate,
    uncoded_uep_optimize, PolicyEvaluation, SweepOptions, SweepReport, UncodedAllocation, DEFAULT_SEARCH_CAP,
};
pub use policy_space::{PolicySpace, PolicyVisitor};
pub use scalar::Probability;
pub use stream::{MetricWeights, StreamSpec, SystemConfig};

/// Exact rational probabilities.
pub type Rational = num_rational::BigRational;

pub type ExactConfig = SystemConfig<Rational>;
pub type ExactWeights = MetricWeights<Rational>;
pub type ExactLayerDistribution = LayerDistribution<Rational>;
pub type ExactEvaluation = PolicyEvaluation<Rational>;

pub type ConfigF32 = SystemConfig<f32>;
pub type WeightsF32 = MetricWeights<f32>;
