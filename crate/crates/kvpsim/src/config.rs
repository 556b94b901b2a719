//! Simulation inputs: model/hardware/workload/variant types, presets, and the
//! scenario document format.
//!
//! A [`Scenario`] is an immutable, fully-resolved description of one run. It
//! is built either programmatically or by parsing a UTF-8 JSON document with
//! top-level sections `model`, `hardware`, `workload`, `variant`. Only the
//! `model` section is required; the others fall back to defaults (`h20`
//! hardware, batch 1, baseline variant). Unknown keys are errors.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Attention / KV-layout hyperparameters.
///
/// `q_heads` sizes the kernel grid; `kv_heads` governs how many query heads
/// share one physical KV block (grouped-query attention when `kv_heads <
/// q_heads`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Bytes per model parameter (2 for fp16).
    pub bytes_per_param: u64,
    /// Dimension of a single attention head.
    pub head_dim: u64,
    /// Tokens held by one KV block.
    pub tokens_per_block: u64,
    /// Threads per CUDA thread block; must be a multiple of the warp width.
    pub threads_per_block: u64,
    pub q_heads: u64,
    pub kv_heads: u64,
}

impl ModelConfig {
    /// Warps per thread block.
    pub fn warps_per_block(&self) -> u64 {
        self.threads_per_block / 32
    }

    /// Query heads served by each KV head.
    pub fn group_size(&self) -> u64 {
        self.q_heads / self.kv_heads
    }
}

/// Simulated GPU memory hierarchy and SM occupancy parameters.
///
/// Latencies are cycles, bandwidths are bytes per cycle. `bw_l2` is validated
/// for tier ordering but the L2-to-SM path is not a modeled contention point;
/// only the HBM channel serializes traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareConfig {
    /// L1 capacity in bytes, per SM.
    pub l1_capacity: u64,
    /// L2 capacity in bytes, shared by all SMs.
    pub l2_capacity: u64,
    /// Cache line size in bytes at both levels.
    pub line_size: u64,
    pub lat_l1: u64,
    pub lat_l2: u64,
    pub lat_hbm: u64,
    pub bw_l2: u64,
    pub bw_hbm: u64,
    pub sm_count: u64,
    pub max_blocks_per_sm: u64,
    /// Maximum simultaneously in-flight prefetch transfers; excess prefetches
    /// are dropped, not queued.
    pub prefetch_queue_depth: u64,
    /// Simulated HBM address space in bytes.
    pub hbm_capacity: u64,
}

/// How physical block addresses are handed out when building block tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum AllocationPolicy {
    /// Monotonically increasing addresses in (sequence, head, ordinal) order.
    Sequential,
    /// Deterministic permutation of the same address set.
    Shuffled {
        #[serde(default)]
        seed: u64,
    },
}

/// Per-run workload shape: how many sequences, how long, and the cost of the
/// two compute phases per block iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub batch: u64,
    /// Tokens per sequence at the simulated decode step.
    pub seq_len: u64,
    /// Busy cycles for one K-block QK^T phase.
    pub compute_cycles_qk: u64,
    /// Busy cycles for one V-block logits-V phase (softmax folded in).
    pub compute_cycles_lv: u64,
    pub allocation_policy: AllocationPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Baseline,
    PrefetchK,
    PrefetchKv,
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariantKind::Baseline => "baseline",
            VariantKind::PrefetchK => "prefetch_k",
            VariantKind::PrefetchKv => "prefetch_kv",
        })
    }
}

impl std::str::FromStr for VariantKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "baseline" => Ok(VariantKind::Baseline),
            "prefetch_k" => Ok(VariantKind::PrefetchK),
            "prefetch_kv" => Ok(VariantKind::PrefetchKv),
            other => Err(ConfigError::Invalid {
                field: "variant.kind".into(),
                rule: format!(
                    "unknown variant `{other}` (expected baseline, prefetch_k or prefetch_kv)"
                ),
            }),
        }
    }
}

/// Cache-line eviction priority carried by prefetched data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvictionPriority {
    Normal,
    EvictFirst,
}

/// Which kernel flavor to run and how its prefetches are tagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelVariant {
    pub kind: VariantKind,
    pub eviction_priority: EvictionPriority,
    /// Issue the next-block prefetch together with the current load instead
    /// of at compute-phase entry. Sensitivity knob; default off.
    #[serde(default)]
    pub prefetch_at_load_issue: bool,
}

impl Default for KernelVariant {
    fn default() -> Self {
        KernelVariant {
            kind: VariantKind::Baseline,
            eviction_priority: EvictionPriority::Normal,
            prefetch_at_load_issue: false,
        }
    }
}

/// A fully resolved simulation input. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: ModelConfig,
    pub hardware: HardwareConfig,
    pub workload: WorkloadConfig,
    pub variant: KernelVariant,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("missing required section \"{0}\"")]
    MissingSection(String),
    #[error("missing field {0}")]
    MissingField(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid {field}: {rule}")]
    Invalid { field: String, rule: String },
    #[error("bad --set override `{0}`: expected section.key=value")]
    BadOverride(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    fn invalid(field: &str, rule: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

pub const MODEL_PRESETS: &[&str] = &["llama2-7b", "llama3-8b", "qwen2.5-7b", "qwen2.5-14b"];
pub const HARDWARE_PRESETS: &[&str] = &["h20", "h100", "custom-small"];

/// Head configurations of the supported decoder models. All share fp16
/// parameters, 128-wide heads, 16-token blocks and 128-thread blocks.
pub fn preset_model(name: &str) -> Result<ModelConfig, ConfigError> {
    let (q_heads, kv_heads) = match name {
        "llama2-7b" => (32, 32),
        "llama3-8b" => (32, 8),
        "qwen2.5-7b" => (28, 4),
        "qwen2.5-14b" => (40, 8),
        _ => return Err(ConfigError::UnknownPreset(name.to_string())),
    };
    Ok(ModelConfig {
        bytes_per_param: 2,
        head_dim: 128,
        tokens_per_block: 16,
        threads_per_block: 128,
        q_heads,
        kv_heads,
    })
}

// Default tier timing: latencies 32/200/600 cycles and bandwidths in the
// 12 : 3.35 ratio of the L2/HBM tiers (scale factor 3600). Absolute values
// are modeling defaults; only trends are asserted against them.
const DEFAULT_LAT_L1: u64 = 32;
const DEFAULT_LAT_L2: u64 = 200;
const DEFAULT_LAT_HBM: u64 = 600;
const DEFAULT_BW_L2: u64 = 43_200;
const DEFAULT_BW_HBM: u64 = 12_060;

/// Hardware presets. `h20`/`h100` model a 60 MB L2 part at full SM count;
/// `custom-small` is a deliberately tiny machine (256 KiB L2, 32 SMs, scaled
/// bandwidth) so capacity-boundary effects appear at desk scale.
pub fn preset_hardware(name: &str) -> Result<HardwareConfig, ConfigError> {
    match name {
        "h20" => Ok(HardwareConfig {
            l1_capacity: 128 * 1024,
            l2_capacity: 60 * 1024 * 1024,
            line_size: 128,
            lat_l1: DEFAULT_LAT_L1,
            lat_l2: DEFAULT_LAT_L2,
            lat_hbm: DEFAULT_LAT_HBM,
            bw_l2: DEFAULT_BW_L2,
            bw_hbm: DEFAULT_BW_HBM,
            sm_count: 78,
            max_blocks_per_sm: 2,
            prefetch_queue_depth: 4096,
            hbm_capacity: 96 * 1024 * 1024 * 1024,
        }),
        "h100" => Ok(HardwareConfig {
            hbm_capacity: 80 * 1024 * 1024 * 1024,
            ..preset_hardware("h20").unwrap()
        }),
        "custom-small" => Ok(HardwareConfig {
            l1_capacity: 16 * 1024,
            l2_capacity: 256 * 1024,
            line_size: 128,
            lat_l1: DEFAULT_LAT_L1,
            lat_l2: DEFAULT_LAT_L2,
            lat_hbm: DEFAULT_LAT_HBM,
            bw_l2: 7200,
            bw_hbm: 2010,
            sm_count: 32,
            max_blocks_per_sm: 1,
            prefetch_queue_depth: 4096,
            hbm_capacity: 4 * 1024 * 1024 * 1024,
        }),
        _ => Err(ConfigError::UnknownPreset(name.to_string())),
    }
}

/// Default per-phase compute cost: FLOPs of one block phase (2 * d_h * T_block
/// per warp lane pair) at a nominal 128 FLOP/cycle/warp.
pub fn default_compute_cycles(model: &ModelConfig) -> u64 {
    (2 * model.head_dim * model.tokens_per_block)
        .div_ceil(128)
        .max(1)
}

impl WorkloadConfig {
    /// Batch/seq-length workload with compute costs derived from the model.
    pub fn with_defaults(model: &ModelConfig, batch: u64, seq_len: u64) -> Self {
        let cc = default_compute_cycles(model);
        WorkloadConfig {
            batch,
            seq_len,
            compute_cycles_qk: cc,
            compute_cycles_lv: cc,
            allocation_policy: AllocationPolicy::Sequential,
        }
    }
}

impl Scenario {
    /// Preset model on default hardware; the usual starting point.
    pub fn preset(model_name: &str, batch: u64, seq_len: u64) -> Result<Self, ConfigError> {
        let model = preset_model(model_name)?;
        let scenario = Scenario {
            model,
            hardware: preset_hardware("h20")?,
            workload: WorkloadConfig::with_defaults(&model, batch, seq_len),
            variant: KernelVariant::default(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn with_variant(mut self, kind: VariantKind) -> Self {
        self.variant.kind = kind;
        self
    }

    /// Checks every cross-field invariant. Returns the first violation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        for (name, v) in [
            ("model.bytes_per_param", m.bytes_per_param),
            ("model.head_dim", m.head_dim),
            ("model.tokens_per_block", m.tokens_per_block),
            ("model.threads_per_block", m.threads_per_block),
            ("model.q_heads", m.q_heads),
            ("model.kv_heads", m.kv_heads),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(name, "must be strictly positive"));
            }
        }
        if !m.threads_per_block.is_multiple_of(32) {
            return Err(ConfigError::invalid(
                "model.threads_per_block",
                "not divisible by 32",
            ));
        }
        if !m.q_heads.is_multiple_of(m.kv_heads) {
            return Err(ConfigError::invalid(
                "model.q_heads",
                "must be divisible by kv_heads",
            ));
        }
        m.bytes_per_param
            .checked_mul(m.head_dim)
            .and_then(|x| x.checked_mul(m.tokens_per_block))
            .ok_or_else(|| ConfigError::invalid("model", "block footprint overflows u64"))?;

        let h = &self.hardware;
        for (name, v) in [
            ("hardware.l1_capacity", h.l1_capacity),
            ("hardware.l2_capacity", h.l2_capacity),
            ("hardware.line_size", h.line_size),
            ("hardware.lat_l1", h.lat_l1),
            ("hardware.lat_l2", h.lat_l2),
            ("hardware.lat_hbm", h.lat_hbm),
            ("hardware.bw_l2", h.bw_l2),
            ("hardware.bw_hbm", h.bw_hbm),
            ("hardware.sm_count", h.sm_count),
            ("hardware.max_blocks_per_sm", h.max_blocks_per_sm),
            ("hardware.hbm_capacity", h.hbm_capacity),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(name, "must be strictly positive"));
            }
        }
        if !(h.lat_l1 < h.lat_l2 && h.lat_l2 < h.lat_hbm) {
            return Err(ConfigError::invalid(
                "hardware.lat_l1/lat_l2/lat_hbm",
                "latencies must satisfy lat_l1 < lat_l2 < lat_hbm",
            ));
        }
        if h.bw_hbm >= h.bw_l2 {
            return Err(ConfigError::invalid(
                "hardware.bw_hbm",
                "must be smaller than bw_l2 (HBM is the slower tier)",
            ));
        }
        if !h.l1_capacity.is_multiple_of(h.line_size) || !h.l2_capacity.is_multiple_of(h.line_size)
        {
            return Err(ConfigError::invalid(
                "hardware.line_size",
                "must divide l1_capacity and l2_capacity",
            ));
        }

        let w = &self.workload;
        if w.batch < 1 {
            return Err(ConfigError::invalid("workload.batch", "must be at least 1"));
        }
        if w.seq_len < 1 {
            return Err(ConfigError::invalid(
                "workload.seq_len",
                "must be at least 1",
            ));
        }
        if w.compute_cycles_qk < 1 || w.compute_cycles_lv < 1 {
            return Err(ConfigError::invalid(
                "workload.compute_cycles_qk/lv",
                "compute cycle costs must be at least 1",
            ));
        }

        if self.variant.kind != VariantKind::Baseline && h.prefetch_queue_depth < 1 {
            return Err(ConfigError::invalid(
                "variant.kind",
                "prefetch variants require hardware.prefetch_queue_depth >= 1",
            ));
        }
        Ok(())
    }

    /// Canonical JSON rendering with every field explicit. `parse_scenario`
    /// of the result reproduces the scenario exactly.
    pub fn render(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

// Known keys per section, used to reject typos before deserializing.
const MODEL_KEYS: &[&str] = &[
    "preset",
    "bytes_per_param",
    "head_dim",
    "tokens_per_block",
    "threads_per_block",
    "q_heads",
    "kv_heads",
];
const HARDWARE_KEYS: &[&str] = &[
    "preset",
    "l1_capacity",
    "l2_capacity",
    "line_size",
    "lat_l1",
    "lat_l2",
    "lat_hbm",
    "bw_l2",
    "bw_hbm",
    "sm_count",
    "max_blocks_per_sm",
    "prefetch_queue_depth",
    "hbm_capacity",
];
const WORKLOAD_KEYS: &[&str] = &[
    "batch",
    "seq_len",
    "compute_cycles_qk",
    "compute_cycles_lv",
    "allocation_policy",
];
const VARIANT_KEYS: &[&str] = &["kind", "eviction_priority", "prefetch_at_load_issue"];

fn check_keys(section: &str, value: &serde_json::Value, known: &[&str]) -> Result<(), ConfigError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ConfigError::invalid(section, "section must be a JSON object"))?;
    for key in obj.keys() {
        if !known.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(format!("{section}.{key}")));
        }
    }
    Ok(())
}

fn take_u64(
    section: &str,
    obj: &serde_json::Map<String, serde_json::Value>,
    key: &str,
) -> Result<Option<u64>, ConfigError> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v.as_u64().map(Some).ok_or_else(|| {
            ConfigError::invalid(
                &format!("{section}.{key}"),
                "expected a non-negative integer",
            )
        }),
    }
}

fn resolve_model(value: &serde_json::Value) -> Result<ModelConfig, ConfigError> {
    check_keys("model", value, MODEL_KEYS)?;
    let obj = value.as_object().unwrap();
    let mut base = match obj.get("preset") {
        Some(p) => {
            let name = p
                .as_str()
                .ok_or_else(|| ConfigError::invalid("model.preset", "expected a string"))?;
            Some(preset_model(name)?)
        }
        None => None,
    };
    let mut field =
        |key: &str, slot: fn(&mut ModelConfig) -> &mut u64| -> Result<(), ConfigError> {
            if let Some(v) = take_u64("model", obj, key)? {
                match &mut base {
                    Some(m) => *slot(m) = v,
                    None => {
                        // No preset: collect explicit fields into a zeroed config,
                        // completeness is checked below.
                        let mut m = ModelConfig {
                            bytes_per_param: 0,
                            head_dim: 0,
                            tokens_per_block: 0,
                            threads_per_block: 0,
                            q_heads: 0,
                            kv_heads: 0,
                        };
                        *slot(&mut m) = v;
                        base = Some(m);
                    }
                }
            }
            Ok(())
        };
    field("bytes_per_param", |m| &mut m.bytes_per_param)?;
    field("head_dim", |m| &mut m.head_dim)?;
    field("tokens_per_block", |m| &mut m.tokens_per_block)?;
    field("threads_per_block", |m| &mut m.threads_per_block)?;
    field("q_heads", |m| &mut m.q_heads)?;
    field("kv_heads", |m| &mut m.kv_heads)?;

    let model =
        base.ok_or_else(|| ConfigError::MissingField("model.preset or explicit fields".into()))?;
    if obj.get("preset").is_none() {
        for (key, v) in [
            ("model.bytes_per_param", model.bytes_per_param),
            ("model.head_dim", model.head_dim),
            ("model.tokens_per_block", model.tokens_per_block),
            ("model.threads_per_block", model.threads_per_block),
            ("model.q_heads", model.q_heads),
            ("model.kv_heads", model.kv_heads),
        ] {
            if v == 0 {
                return Err(ConfigError::MissingField(key.into()));
            }
        }
    }
    Ok(model)
}

fn resolve_hardware(value: Option<&serde_json::Value>) -> Result<HardwareConfig, ConfigError> {
    let value = match value {
        None => return preset_hardware("h20"),
        Some(v) => v,
    };
    check_keys("hardware", value, HARDWARE_KEYS)?;
    let obj = value.as_object().unwrap();
    let mut hw = match obj.get("preset") {
        Some(p) => {
            let name = p
                .as_str()
                .ok_or_else(|| ConfigError::invalid("hardware.preset", "expected a string"))?;
            preset_hardware(name)?
        }
        None => preset_hardware("h20")?,
    };
    macro_rules! set {
        ($key:literal, $field:ident) => {
            if let Some(v) = take_u64("hardware", obj, $key)? {
                hw.$field = v;
            }
        };
    }
    set!("l1_capacity", l1_capacity);
    set!("l2_capacity", l2_capacity);
    set!("line_size", line_size);
    set!("lat_l1", lat_l1);
    set!("lat_l2", lat_l2);
    set!("lat_hbm", lat_hbm);
    set!("bw_l2", bw_l2);
    set!("bw_hbm", bw_hbm);
    set!("sm_count", sm_count);
    set!("max_blocks_per_sm", max_blocks_per_sm);
    set!("prefetch_queue_depth", prefetch_queue_depth);
    set!("hbm_capacity", hbm_capacity);
    Ok(hw)
}

fn resolve_workload(
    value: Option<&serde_json::Value>,
    model: &ModelConfig,
) -> Result<WorkloadConfig, ConfigError> {
    let mut wl = WorkloadConfig::with_defaults(model, 1, 4096);
    let value = match value {
        None => return Ok(wl),
        Some(v) => v,
    };
    check_keys("workload", value, WORKLOAD_KEYS)?;
    let obj = value.as_object().unwrap();
    if let Some(v) = take_u64("workload", obj, "batch")? {
        wl.batch = v;
    }
    if let Some(v) = take_u64("workload", obj, "seq_len")? {
        wl.seq_len = v;
    }
    if let Some(v) = take_u64("workload", obj, "compute_cycles_qk")? {
        wl.compute_cycles_qk = v;
    }
    if let Some(v) = take_u64("workload", obj, "compute_cycles_lv")? {
        wl.compute_cycles_lv = v;
    }
    if let Some(v) = obj.get("allocation_policy") {
        wl.allocation_policy = serde_json::from_value(v.clone())
            .map_err(|e| ConfigError::invalid("workload.allocation_policy", e.to_string()))?;
    }
    Ok(wl)
}

fn resolve_variant(value: Option<&serde_json::Value>) -> Result<KernelVariant, ConfigError> {
    let mut variant = KernelVariant::default();
    let value = match value {
        None => return Ok(variant),
        Some(v) => v,
    };
    check_keys("variant", value, VARIANT_KEYS)?;
    let obj = value.as_object().unwrap();
    if let Some(v) = obj.get("kind") {
        variant.kind = serde_json::from_value(v.clone())
            .map_err(|e| ConfigError::invalid("variant.kind", e.to_string()))?;
    }
    if let Some(v) = obj.get("eviction_priority") {
        variant.eviction_priority = serde_json::from_value(v.clone())
            .map_err(|e| ConfigError::invalid("variant.eviction_priority", e.to_string()))?;
    }
    if let Some(v) = obj.get("prefetch_at_load_issue") {
        variant.prefetch_at_load_issue = v.as_bool().ok_or_else(|| {
            ConfigError::invalid("variant.prefetch_at_load_issue", "expected a boolean")
        })?;
    }
    Ok(variant)
}

/// Parses a scenario document (see module docs for the format), applies
/// defaults for omitted sections and validates all invariants.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario_from_value(&value)
}

/// Same as [`parse_scenario`] but starting from an already-parsed document,
/// e.g. after `--set` overrides have been applied.
pub fn scenario_from_value(value: &serde_json::Value) -> Result<Scenario, ConfigError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ConfigError::invalid("document", "top level must be a JSON object"))?;
    for key in obj.keys() {
        if !["model", "hardware", "workload", "variant"].contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    let model_value = obj
        .get("model")
        .ok_or_else(|| ConfigError::MissingSection("model".into()))?;
    let model = resolve_model(model_value)?;
    let scenario = Scenario {
        model,
        hardware: resolve_hardware(obj.get("hardware"))?,
        workload: resolve_workload(obj.get("workload"), &model)?,
        variant: resolve_variant(obj.get("variant"))?,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Applies one `section.key=value` override onto a scenario document.
/// Values parse as JSON when possible and fall back to strings, so
/// `workload.batch=4` and `variant.kind=prefetch_k` both work.
pub fn apply_override(doc: &mut serde_json::Value, spec: &str) -> Result<(), ConfigError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
    if section.is_empty() || key.is_empty() {
        return Err(ConfigError::BadOverride(spec.to_string()));
    }
    let value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| ConfigError::invalid("document", "top level must be a JSON object"))?;
    let entry = obj
        .entry(section.to_string())
        .or_insert_with(|| serde_json::Value::Object(Default::default()));
    let section_obj = entry
        .as_object_mut()
        .ok_or_else(|| ConfigError::invalid(section, "section must be a JSON object"))?;
    section_obj.insert(key.to_string(), value);
    Ok(())
}
