//! Streams, channels and transmission budget.

use crate::error::ConfigError;
use crate::scalar::Probability;

/// Per-GOP layer sizes of one layered stream. Layer 1 is the base layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamSpec {
    packets_per_layer: Vec<u32>,
}

impl StreamSpec {
    pub fn new(packets_per_layer: Vec<u32>) -> Result<Self, ConfigError> {
        if packets_per_layer.is_empty() {
            return Err(ConfigError::NoLayers);
        }
        if let Some(layer) = packets_per_layer.iter().position(|&k| k == 0) {
            return Err(ConfigError::EmptyLayer { stream: None, layer: layer + 1 });
        }
        Ok(Self { packets_per_layer })
    }

    pub fn layer_count(&self) -> usize {
        self.packets_per_layer.len()
    }

    pub fn packets_per_layer(&self) -> &[u32] {
        &self.packets_per_layer
    }

    /// Packets in layers `1..=layer`; `cumulative(0) == 0`.
    pub fn cumulative(&self, layer: usize) -> u32 {
        self.packets_per_layer[..layer].iter().sum()
    }

    pub fn total_packets(&self) -> u32 {
        self.cumulative(self.layer_count())
    }
}

/// Validated system description: streams, per-user erasure probabilities and
/// the number of coded transmissions per GOP.
///
/// User `i` wants stream `i` and sees a memoryless erasure channel with
/// probability `per[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<P = f64> {
    streams: Vec<StreamSpec>,
    per: Vec<P>,
    budget: u32,
}

impl<P: Probability> SystemConfig<P> {
    /// Checks every invariant and builds the configuration.
    pub fn new(streams: Vec<StreamSpec>, per: Vec<P>, budget: u32) -> Result<Self, ConfigError> {
        if streams.is_empty() {
            return Err(ConfigError::NoStreams);
        }
        if streams.len() != per.len() {
            return Err(ConfigError::LengthMismatch { streams: streams.len(), per: per.len() });
        }
        for (user, pe) in per.iter().enumerate() {
            if !(*pe >= P::zero() && *pe <= P::one()) {
                return Err(ConfigError::PerOutOfRange { user: user + 1, value: pe.as_f64() });
            }
        }
        Ok(Self { streams, per, budget })
    }

    /// Validates raw layer-size lists as read from a scenario file.
    pub fn from_raw(streams: Vec<Vec<u32>>, per: Vec<P>, budget: u32) -> Result<Self, ConfigError> {
        if streams.is_empty() {
            return Err(ConfigError::NoStreams);
        }
        let streams = streams
            .into_iter()
            .enumerate()
            .map(|(i, k)| {
                StreamSpec::new(k).map_err(|e| match e {
                    ConfigError::EmptyLayer { layer, .. } => {
                        ConfigError::EmptyLayer { stream: Some(i + 1), layer }
                    }
                    ConfigError::NoLayers => ConfigError::StreamWithoutLayers { stream: i + 1 },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(streams, per, budget)
    }

    /// Re-runs validation on an existing value.
    pub fn validate(&self) -> Result<Self, ConfigError> {
        Self::new(self.streams.clone(), self.per.clone(), self.budget)
    }

    pub fn stream_count(&self) -> usize {
        self.streams.len()
    }

    pub fn streams(&self) -> &[StreamSpec] {
        &self.streams
    }

    pub fn stream(&self, i: usize) -> &StreamSpec {
        &self.streams[i]
    }

    pub fn per(&self) -> &[P] {
        &self.per
    }

    pub fn budget(&self) -> u32 {
        self.budget
    }

    pub fn layer_counts(&self) -> Vec<usize> {
        self.streams.iter().map(StreamSpec::layer_count).collect()
    }

    pub fn total_packets(&self) -> u32 {
        self.streams.iter().map(StreamSpec::total_packets).sum()
    }

    pub fn with_budget(&self, budget: u32) -> Self {
        Self { budget, ..self.clone() }
    }

    pub fn with_per(&self, per: Vec<P>) -> Result<Self, ConfigError> {
        Self::new(self.streams.clone(), per, self.budget)
    }

    /// Converts the erasure probabilities to another scalar type.
    pub fn convert<Q: Probability>(&self) -> Result<SystemConfig<Q>, ConfigError> {
        let per = self
            .per
            .iter()
            .enumerate()
            .map(|(user, p)| {
                Q::from_decimal(p.as_f64())
                    .ok_or(ConfigError::PerOutOfRange { user: user + 1, value: p.as_f64() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        SystemConfig::new(self.streams.clone(), per, self.budget)
    }
}

/// Cumulative layer weights `a_1 ..= a_L` of each stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricWeights<P = f64> {
    per_stream: Vec<Vec<P>>,
}

impl<P: Probability> MetricWeights<P> {
    /// Throughput weights for every stream of `config`.
    pub fn throughput(config: &SystemConfig<P>) -> Self {
        Self { per_stream: config.streams().iter().map(throughput_weights).collect() }
    }

    /// Explicit weights; each list must match its stream's layer count, lie in
    /// `(0, 1]` and be nondecreasing.
    pub fn explicit(config: &SystemConfig<P>, per_stream: Vec<Vec<P>>) -> Result<Self, ConfigError> {
        if per_stream.len() != config.stream_count() {
            return Err(ConfigError::WeightStreamCount {
                expected: config.stream_count(),
                found: per_stream.len(),
            });
        }
        for (i, (w, s)) in per_stream.iter().zip(config.streams()).enumerate() {
            if w.len() != s.layer_count() {
                return Err(ConfigError::WeightLength {
                    stream: i + 1,
                    expected: s.layer_count(),
                    found: w.len(),
                });
            }
            let in_range = w.iter().all(|a| *a > P::zero() && *a <= P::one());
            let monotone = w.windows(2).all(|p| p[0] <= p[1]);
            if !in_range || !monotone {
                return Err(ConfigError::BadWeights { stream: i + 1 });
            }
        }
        Ok(Self { per_stream })
    }

    pub fn stream(&self, i: usize) -> &[P] {
        &self.per_stream[i]
    }

    pub fn per_stream(&self) -> &[Vec<P>] {
        &self.per_stream
    }

    /// Weight credited when the highest decoded layer is `layer`; zero for 0.
    pub fn credit(&self, stream: usize, layer: usize) -> P {
        if layer == 0 {
            P::zero()
        } else {
            self.per_stream[stream][layer - 1].clone()
        }
    }

    pub fn to_f64(&self) -> MetricWeights<f64> {
        MetricWeights {
            per_stream: self
                .per_stream
                .iter()
                .map(|w| w.iter().map(Probability::as_f64).collect())
                .collect(),
        }
    }
}

/// `a_l = (k_1 + .. + k_l) / (k_1 + .. + k_L)`: with these weights the
/// metric is the expected fraction of the GOP's packets delivered.
pub fn throughput_weights<P: Probability>(spec: &StreamSpec) -> Vec<P> {
    let total = u64::from(spec.total_packets());
    (1..=spec.layer_count())
        .map(|l| P::from_ratio(u64::from(spec.cumulative(l)), total))
        .collect()
}
