use thiserror::Error;

/// Invalid system or scenario configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("no streams")]
    NoStreams,
    #[error("stream has no layers")]
    NoLayers,
    #[error("stream {stream} has no layers")]
    StreamWithoutLayers { stream: usize },
    #[error("zero-size layer {layer}{}", stream.map(|s| format!(" in stream {s}")).unwrap_or_default())]
    EmptyLayer { stream: Option<usize>, layer: usize },
    #[error("{streams} streams but {per} PER values")]
    LengthMismatch { streams: usize, per: usize },
    #[error("PER out of range for user {user}: {value}")]
    PerOutOfRange { user: usize, value: f64 },
    #[error("weights given for {found} streams, expected {expected}")]
    WeightStreamCount { expected: usize, found: usize },
    #[error("stream {stream}: {found} weights for {expected} layers")]
    WeightLength { stream: usize, expected: usize, found: usize },
    #[error("stream {stream}: weights must lie in (0, 1] and be nondecreasing")]
    BadWeights { stream: usize },
}

/// A window index or window set that does not fit the configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WindowError {
    #[error("window {window} has {found} indices, expected {expected}")]
    Arity { window: String, expected: usize, found: usize },
    #[error("window {window}: index {index} exceeds layer count {layers} of stream {stream}")]
    OutOfRange { window: String, stream: usize, index: usize, layers: usize },
    #[error("the all-zero window is undefined")]
    AllZero,
    #[error("duplicate window {0}")]
    Duplicate(String),
    #[error("empty window set")]
    Empty,
    #[error("three-stream subset needs layer counts (2, 2, 1), got {0:?}")]
    ShapeMismatch(Vec<usize>),
}

/// Errors from the probability model and the policy search.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("reception exceeds policy in window {window}: received {received}, sent {sent}")]
    ReceptionExceedsPolicy { window: String, received: u32, sent: u32 },
    #[error("policy sends {found} packets, budget is {expected}")]
    BudgetMismatch { expected: u32, found: u32 },
    #[error("length mismatch: {expected} weights, distribution has {found} layers")]
    LengthMismatch { expected: usize, found: usize },
    #[error("user {user} out of range (N = {streams})")]
    UserOutOfRange { user: usize, streams: usize },
    #[error("search space has {required} candidates, cap is {cap}")]
    CapExceeded { required: u128, cap: u128 },
    #[error("field order {0} is not a prime >= 2^16")]
    FieldOrder(u64),
    #[error("field order {0} is not prime")]
    NotPrime(u64),
    #[error("trial count must be positive")]
    NoTrials,
    #[error("invalid policy text {0:?}")]
    PolicySyntax(String),
}
