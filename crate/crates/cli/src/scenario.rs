//! Scenario files: one TOML document per experiment.

use std::fmt;
use std::path::{Path, PathBuf};

use layercast::{
    MetricWeights, Policy, SystemConfig, WindowIndex, WindowSet, DEFAULT_FIELD_ORDER, DEFAULT_SEARCH_CAP,
};
use serde::Deserialize;

/// A diagnostic tied to the scenario file and, when known, a field in it.
#[derive(Debug)]
pub struct ScenarioError {
    pub path: PathBuf,
    pub field: Option<&'static str>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(field) = self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WindowSpec {
    Named(String),
    Explicit(Vec<Vec<u16>>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WeightSpec {
    Named(String),
    Explicit(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    streams: Vec<Vec<u32>>,
    per: Vec<f64>,
    budget: Option<u32>,
    nt_range: Option<[u32; 2]>,
    windows: Option<WindowSpec>,
    intra_windows: Option<WindowSpec>,
    weights: Option<WeightSpec>,
    policy: Option<String>,
    trials: Option<u64>,
    field_order: Option<u64>,
    seed: Option<u64>,
    cap: Option<u128>,
    certify: Option<bool>,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub path: PathBuf,
    pub name: String,
    pub config: SystemConfig,
    pub windows: WindowSet,
    pub intra_windows: WindowSet,
    pub weights: MetricWeights,
    pub nt_range: (u32, u32),
    pub policy: Option<Policy>,
    pub trials: u64,
    pub field_order: u64,
    pub seed: u64,
    pub cap: u128,
    pub certify: bool,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            path: path.to_path_buf(),
            field: None,
            message: format!("cannot read: {e}"),
        })?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, ScenarioError> {
        let err = |field: Option<&'static str>, message: String| ScenarioError { path: path.to_path_buf(), field, message };
        let raw: RawScenario = toml::from_str(text).map_err(|e| err(None, e.to_string().trim_end().to_string()))?;

        let config = SystemConfig::from_raw(raw.streams, raw.per, raw.budget.unwrap_or(0)).map_err(|e| {
            let field = match e {
                layercast::ConfigError::PerOutOfRange { .. } | layercast::ConfigError::LengthMismatch { .. } => "per",
                _ => "streams",
            };
            err(Some(field), e.to_string())
        })?;
        let windows = resolve_windows(&config, raw.windows.unwrap_or(WindowSpec::Named("full".into())))
            .map_err(|m| err(Some("windows"), m))?;
        let intra_windows = resolve_windows(&config, raw.intra_windows.unwrap_or(WindowSpec::Named("intra".into())))
            .map_err(|m| err(Some("intra_windows"), m))?;
        let weights = match raw.weights.unwrap_or(WeightSpec::Named("throughput".into())) {
            WeightSpec::Named(n) if n == "throughput" => MetricWeights::throughput(&config),
            WeightSpec::Named(n) => return Err(err(Some("weights"), format!("unknown weights `{n}`, expected `throughput` or a list per stream"))),
            WeightSpec::Explicit(w) => MetricWeights::explicit(&config, w).map_err(|e| err(Some("weights"), e.to_string()))?,
        };
        let default_top = 3 * config.total_packets();
        let nt_range = match raw.nt_range {
            Some([a, b]) if a > b => return Err(err(Some("nt_range"), format!("empty range [{a}, {b}]"))),
            Some([a, b]) => (a, b),
            None => (1, default_top),
        };
        let policy = raw
            .policy
            .map(|p| -> Result<Policy, ScenarioError> {
                let p: Policy = p.parse().map_err(|e: layercast::ModelError| err(Some("policy"), e.to_string()))?;
                for (w, _) in p.iter() {
                    w.check(&config).map_err(|e| err(Some("policy"), e.to_string()))?;
                }
                Ok(p)
            })
            .transpose()?;
        if let (Some(p), Some(b)) = (&policy, raw.budget) {
            if p.total() != b {
                return Err(err(Some("policy"), format!("policy sends {} packets but budget is {b}", p.total())));
            }
        }
        let config = match (&policy, raw.budget) {
            (Some(p), None) => config.with_budget(p.total()),
            _ => config,
        };
        let trials = raw.trials.unwrap_or(100_000);
        if trials == 0 {
            return Err(err(Some("trials"), "must be at least 1".into()));
        }
        let field_order = raw.field_order.unwrap_or(DEFAULT_FIELD_ORDER);
        layercast::PrimeField::new(field_order).map_err(|e| err(Some("field_order"), e.to_string()))?;
        let name = raw.name.unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into())
        });
        Ok(Scenario {
            path: path.to_path_buf(),
            name,
            config,
            windows,
            intra_windows,
            weights,
            nt_range,
            policy,
            trials,
            field_order,
            seed: raw.seed.unwrap_or(0),
            cap: raw.cap.unwrap_or(DEFAULT_SEARCH_CAP),
            certify: raw.certify.unwrap_or(true),
        })
    }

    pub fn error(&self, field: Option<&'static str>, message: impl Into<String>) -> ScenarioError {
        ScenarioError { path: self.path.clone(), field, message: message.into() }
    }
}

fn resolve_windows(config: &SystemConfig, spec: WindowSpec) -> Result<WindowSet, String> {
    match spec {
        WindowSpec::Named(n) => match n.as_str() {
            "full" => Ok(WindowSet::full(config)),
            "intra" => Ok(WindowSet::intra(config)),
            "n3-subset" => WindowSet::n3_subset(config).map_err(|e| e.to_string()),
            _ => Err(format!("unknown window selection `{n}`, expected `full`, `intra`, `n3-subset` or a list")),
        },
        WindowSpec::Explicit(list) => {
            let ws = list
                .into_iter()
                .map(WindowIndex::new)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            WindowSet::new(config, ws).map_err(|e| e.to_string())
        }
    }
}
