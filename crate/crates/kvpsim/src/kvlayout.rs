//! Paged KV-cache layout: block footprint analytics, L2 residency bounds and
//! physical block tables.
//!
//! A sequence's K and V data is split into fixed-size blocks, one attention
//! head and `tokens_per_block` tokens per block. The analytics here answer
//! "how many bytes does one decode iteration touch" and "how many batches of
//! that working set fit in L2"; the block tables give each (sequence, kv
//! head, ordinal) block a physical address in the simulated HBM space.

use crate::config::{AllocationPolicy, ConfigError, HardwareConfig, ModelConfig, WorkloadConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Bytes of a single KV block: `bytes_per_param * head_dim * tokens_per_block`.
pub fn block_footprint(model: &ModelConfig) -> u64 {
    model.bytes_per_param * model.head_dim * model.tokens_per_block
}

/// Bytes of blocks demanded by one kernel iteration: one block per warp, per
/// query head, per sequence. Independent of sequence length — longer
/// sequences mean more iterations, not bigger ones.
pub fn per_iteration_footprint(model: &ModelConfig, batch: u64) -> u64 {
    block_footprint(model) * model.warps_per_block() * model.q_heads * batch
}

/// Distinct bytes touched by one iteration: under grouped-query attention the
/// query heads of a group share one KV block, so only `kv_heads` distinct
/// blocks exist per warp lane. Coincides with [`per_iteration_footprint`]
/// for multi-head attention.
pub fn per_iteration_distinct_footprint(model: &ModelConfig, batch: u64) -> u64 {
    block_footprint(model) * model.warps_per_block() * model.kv_heads * batch
}

/// Largest batch whose per-iteration demand working set fully fits in L2.
pub fn l2_residency_bound(model: &ModelConfig, hw: &HardwareConfig) -> u64 {
    hw.l2_capacity / per_iteration_footprint(model, 1)
}

/// Blocks needed to hold `seq_len` tokens; the last block may be partial but
/// is allocated (and counted) at full size.
pub fn blocks_per_sequence(seq_len: u64, tokens_per_block: u64) -> u64 {
    seq_len.div_ceil(tokens_per_block)
}

/// KV head serving a given query head: consecutive groups of
/// `q_heads / kv_heads` query heads map to one KV head.
pub fn kv_head_for_q_head(q_head: u64, model: &ModelConfig) -> u64 {
    debug_assert!(q_head < model.q_heads);
    q_head / model.group_size()
}

/// Capacity analytics for one model/hardware pair.
///
/// The first four fields follow the demand-request view (one block per query
/// head); the `*_distinct` fields count each shared block once, and
/// `residency_bound_batches_kv` asks for K and V working sets resident
/// simultaneously.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CapacityReport {
    pub m_block_bytes: u64,
    pub m_total_per_batch_bytes: u64,
    pub m_total_bytes: u64,
    pub residency_bound_batches: u64,
    pub m_total_per_batch_distinct_bytes: u64,
    pub residency_bound_batches_distinct: u64,
    pub residency_bound_batches_kv: u64,
}

pub fn capacity_report(model: &ModelConfig, hw: &HardwareConfig, batch: u64) -> CapacityReport {
    let per_batch = per_iteration_footprint(model, 1);
    let per_batch_distinct = per_iteration_distinct_footprint(model, 1);
    CapacityReport {
        m_block_bytes: block_footprint(model),
        m_total_per_batch_bytes: per_batch,
        m_total_bytes: per_batch * batch,
        residency_bound_batches: hw.l2_capacity / per_batch,
        m_total_per_batch_distinct_bytes: per_batch_distinct,
        residency_bound_batches_distinct: hw.l2_capacity / per_batch_distinct,
        residency_bound_batches_kv: hw.l2_capacity / (2 * per_batch),
    }
}

/// Physical addresses for every K and V block of a workload.
///
/// K and V live in disjoint address ranges. Addresses are `line_size`-aligned,
/// mutually non-overlapping and cover all of
/// `batch x kv_heads x blocks_per_sequence` ordinals for each of K and V.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct BlockTable {
    batch: u64,
    kv_heads: u64,
    blocks_per_sequence: u64,
    block_bytes: u64,
    /// Allocation stride; block_bytes rounded up to line alignment.
    stride: u64,
    k_addrs: Vec<u64>,
    v_addrs: Vec<u64>,
}

impl BlockTable {
    pub fn block_bytes(&self) -> u64 {
        self.block_bytes
    }

    pub fn blocks_per_sequence(&self) -> u64 {
        self.blocks_per_sequence
    }

    /// Distance between consecutively allocated blocks; `block_bytes` rounded
    /// up to line alignment.
    pub fn stride(&self) -> u64 {
        self.stride
    }

    fn index(&self, seq: u64, kv_head: u64, ordinal: u64) -> usize {
        debug_assert!(
            seq < self.batch && kv_head < self.kv_heads && ordinal < self.blocks_per_sequence
        );
        ((seq * self.kv_heads + kv_head) * self.blocks_per_sequence + ordinal) as usize
    }

    /// Physical address of a K block.
    pub fn k_addr(&self, seq: u64, kv_head: u64, ordinal: u64) -> u64 {
        self.k_addrs[self.index(seq, kv_head, ordinal)]
    }

    /// Physical address of a V block.
    pub fn v_addr(&self, seq: u64, kv_head: u64, ordinal: u64) -> u64 {
        self.v_addrs[self.index(seq, kv_head, ordinal)]
    }

    pub fn k_entries(&self) -> &[u64] {
        &self.k_addrs
    }

    pub fn v_entries(&self) -> &[u64] {
        &self.v_addrs
    }
}

/// Lays out all K and V blocks in the simulated HBM space.
///
/// `sequential` assigns monotonically increasing addresses in
/// (sequence, kv head, ordinal) order, K blocks first, then V blocks.
/// `shuffled` deterministically permutes each table's address set from the
/// seed, modeling allocator fragmentation.
pub fn build_block_table(
    model: &ModelConfig,
    hw: &HardwareConfig,
    workload: &WorkloadConfig,
) -> Result<BlockTable, ConfigError> {
    let blocks_per_sequence = blocks_per_sequence(workload.seq_len, model.tokens_per_block);
    let block_bytes = block_footprint(model);
    let stride = block_bytes.div_ceil(hw.line_size) * hw.line_size;
    let per_table = workload
        .batch
        .checked_mul(model.kv_heads)
        .and_then(|n| n.checked_mul(blocks_per_sequence))
        .ok_or_else(|| ConfigError::Invalid {
            field: "workload".into(),
            rule: "block count overflows u64".into(),
        })?;
    let total_bytes = per_table
        .checked_mul(2)
        .and_then(|n| n.checked_mul(stride))
        .ok_or_else(|| ConfigError::Invalid {
            field: "workload".into(),
            rule: "block table footprint overflows u64".into(),
        })?;
    if total_bytes > hw.hbm_capacity {
        return Err(ConfigError::Invalid {
            field: "workload".into(),
            rule: format!(
                "KV blocks need {total_bytes} bytes but simulated HBM holds {}",
                hw.hbm_capacity
            ),
        });
    }

    let mut k_addrs: Vec<u64> = (0..per_table).map(|i| i * stride).collect();
    let v_base = per_table * stride;
    let mut v_addrs: Vec<u64> = (0..per_table).map(|i| v_base + i * stride).collect();
    if let AllocationPolicy::Shuffled { seed } = workload.allocation_policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        k_addrs.shuffle(&mut rng);
        v_addrs.shuffle(&mut rng);
    }

    Ok(BlockTable {
        batch: workload.batch,
        kv_heads: model.kv_heads,
        blocks_per_sequence,
        block_bytes,
        stride,
        k_addrs,
        v_addrs,
    })
}
