//! Cycle-stepped simulator of paged KV-cache access during LLM decode on a
//! tiered GPU memory hierarchy (per-SM L1, shared L2, HBM), modeling the
//! effect of asynchronous L2 prefetching of upcoming KV blocks.
//!
//! The crate answers capacity questions analytically (block footprints, L2
//! residency bounds) and behavioral questions by simulation (cache hit rates,
//! long-scoreboard stalls, kernel duration, prefetch speedup) without any GPU.
//!
//! Start with the runnable examples (`cargo run --example <name>`) or the
//! `kvpsim` binary; the typical library flow is:
//!
//! ```
//! use kvpsim::config::{Scenario, VariantKind};
//! use kvpsim::{kernelsim, metrics};
//!
//! let scenario = Scenario::preset("llama2-7b", 1, 512).unwrap();
//! let baseline = kernelsim::run_kernel(&scenario).unwrap();
//! let prefetch =
//!     kernelsim::run_kernel(&scenario.clone().with_variant(VariantKind::PrefetchKv)).unwrap();
//! let b = metrics::derive_metrics(&baseline, &scenario.hardware);
//! let p = metrics::derive_metrics(&prefetch, &scenario.hardware);
//! assert!(metrics::speedup(&b, &p) > 1.0);
//! ```

pub mod cli;
pub mod config;
pub mod kernelsim;
pub mod kvlayout;
pub mod memsim;
pub mod metrics;

pub use config::{
    ConfigError, HardwareConfig, KernelVariant, ModelConfig, Scenario, WorkloadConfig,
};
pub use kernelsim::{run_kernel, SimReport};
pub use kvlayout::{capacity_report, l2_residency_bound, CapacityReport};
pub use memsim::MemoryHierarchy;
pub use metrics::{derive_metrics, speedup, MetricSet};
