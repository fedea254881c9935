//! Pipeline configuration: TOML file, dotted-path command-line
//! overrides, and a canonical fingerprint for manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use divrec_core::io::sha256_hex;
use divrec_core::pipeline::PipelineParams;
use divrec_core::preferences::GlobalShareMode;
use divrec_core::training::TrainSettings;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsCfg,
    pub dataset: DatasetCfg,
    pub repr: ReprCfg,
    pub select: SelectCfg,
    pub gnn: GnnCfg,
    pub train: TrainCfg,
    pub eval: EvalCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsCfg {
    pub interactions: PathBuf,
    pub items: PathBuf,
    pub workdir: PathBuf,
}

impl Default for PathsCfg {
    fn default() -> Self {
        PathsCfg {
            interactions: PathBuf::from("interactions.csv"),
            items: PathBuf::from("items.jsonl"),
            workdir: PathBuf::from("work"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetCfg {
    pub k_core: usize,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
    pub seed: u64,
}

impl Default for DatasetCfg {
    fn default() -> Self {
        DatasetCfg {
            k_core: 5,
            train_ratio: 0.6,
            val_ratio: 0.2,
            test_ratio: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReprCfg {
    pub d: usize,
    pub dgi_epochs: usize,
    pub dgi_lr: f64,
    /// "touched_union" (default) or "per_category".
    pub global_share_mode: String,
}

impl Default for ReprCfg {
    fn default() -> Self {
        ReprCfg {
            d: 32,
            dgi_epochs: 200,
            dgi_lr: 0.001,
            global_share_mode: "touched_union".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectCfg {
    pub beta_u: f64,
    pub beta_i: f64,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
    pub selection_us: bool,
    pub selection_is: bool,
}

impl Default for SelectCfg {
    fn default() -> Self {
        SelectCfg {
            beta_u: 0.6,
            beta_i: 0.06,
            kmeans_max_iter: 100,
            kmeans_tol: 1e-4,
            selection_us: true,
            selection_is: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnCfg {
    pub n_layers: usize,
    pub warm_start: bool,
}

impl Default for GnnCfg {
    fn default() -> Self {
        GnnCfg {
            n_layers: 3,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCfg {
    pub lr: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub negatives: usize,
    pub early_stop_n: usize,
    pub use_weights: bool,
    pub full_reg: bool,
    /// Defaults to the dataset seed when absent.
    pub seed: Option<u64>,
}

impl Default for TrainCfg {
    fn default() -> Self {
        TrainCfg {
            lr: 0.001,
            lambda: 1e-5,
            batch_size: 2048,
            patience: 10,
            max_epochs: 500,
            negatives: 1,
            early_stop_n: 100,
            use_weights: true,
            full_reg: false,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalCfg {
    pub ns: Vec<usize>,
    pub histogram_bins: usize,
}

impl Default for EvalCfg {
    fn default() -> Self {
        EvalCfg {
            ns: vec![100, 150, 200],
            histogram_bins: 20,
        }
    }
}

/// Configuration or command-line problems; mapped to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Parse one `section.key=value` override into the TOML tree. Values
/// are interpreted as TOML (so booleans, numbers, and arrays work) and
/// fall back to strings.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), UsageError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| usage(format!("override {spec:?} is not of the form key=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(usage(format!("override key {path:?} has an empty segment")));
    }
    let value: toml::Value = toml::from_str::<toml::Value>(&format!("v = {raw}"))
        .ok()
        .and_then(|t| t.get("v").cloned())
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        node = node
            .as_table_mut()
            .ok_or_else(|| usage(format!("override key {path:?} crosses a non-table value")))?
            .entry(key.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    node.as_table_mut()
        .ok_or_else(|| usage(format!("override key {path:?} crosses a non-table value")))?
        .insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Load the config file (defaults when the default path is absent),
/// apply overrides, and deserialize with unknown-key checking.
pub fn load_config(
    path: &Path,
    explicit: bool,
    overrides: &[String],
) -> Result<PipelineConfig, UsageError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound && !explicit => String::new(),
        Err(e) => return Err(usage(format!("cannot read config {}: {e}", path.display()))),
    };
    let mut tree: toml::Value = toml::from_str(&text)
        .map_err(|e| usage(format!("config {} does not parse: {e}", path.display())))?;
    if !tree.is_table() {
        return Err(usage(format!(
            "config {} is not a TOML table",
            path.display()
        )));
    }
    for spec in overrides {
        apply_override(&mut tree, spec)?;
    }
    let config: PipelineConfig = tree
        .try_into()
        .map_err(|e| usage(format!("invalid config: {e}")))?;
    if config.eval.histogram_bins < 2 {
        return Err(usage("eval.histogram_bins must be at least 2"));
    }
    Ok(config)
}

impl PipelineConfig {
    pub fn global_share_mode(&self) -> Result<GlobalShareMode, UsageError> {
        match self.repr.global_share_mode.as_str() {
            "touched_union" => Ok(GlobalShareMode::TouchedUnion),
            "per_category" => Ok(GlobalShareMode::PerCategory),
            other => Err(usage(format!(
                "repr.global_share_mode must be \"touched_union\" or \"per_category\", got {other:?}"
            ))),
        }
    }

    pub fn to_params(&self) -> Result<PipelineParams, UsageError> {
        Ok(PipelineParams {
            k_core: self.dataset.k_core,
            ratios: (
                self.dataset.train_ratio,
                self.dataset.val_ratio,
                self.dataset.test_ratio,
            ),
            seed: self.dataset.seed,
            d: self.repr.d,
            dgi_epochs: self.repr.dgi_epochs,
            dgi_lr: self.repr.dgi_lr,
            global_share_mode: self.global_share_mode()?,
            beta_u: self.select.beta_u,
            beta_i: self.select.beta_i,
            kmeans_max_iter: self.select.kmeans_max_iter,
            kmeans_tol: self.select.kmeans_tol,
            n_layers: self.gnn.n_layers,
            train: self.train_settings(),
            eval_ns: self.eval.ns.clone(),
            selection_us: self.select.selection_us,
            selection_is: self.select.selection_is,
            use_weights: self.train.use_weights,
            warm_start: self.gnn.warm_start,
        })
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            lr: self.train.lr,
            lambda: self.train.lambda,
            batch_size: self.train.batch_size,
            n_layers: self.gnn.n_layers,
            patience: self.train.patience,
            max_epochs: self.train.max_epochs,
            seed: self.train.seed.unwrap_or(self.dataset.seed),
            negatives: self.train.negatives,
            early_stop_n: self.train.early_stop_n,
            full_reg: self.train.full_reg,
        }
    }

    /// Canonical fingerprint: SHA-256 of the JSON serialization (field
    /// order is fixed by the struct definitions).
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        sha256_hex(json.as_bytes())
    }
}
