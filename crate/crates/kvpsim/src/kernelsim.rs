//! Event-driven model of the paged-attention decode kernel.
//!
//! The grid launches one thread block per (query head, sequence). Inside a
//! thread block, warp `i` walks block ordinals `i, i + w, i + 2w, ...` where
//! `w` is the warp count, and for each ordinal runs the phase cycle
//! `issue_load_k -> wait_k -> compute_qk -> issue_load_v -> wait_v ->
//! compute_lv`. A load issue costs one cycle and one instruction; every cycle
//! spent waiting on an incomplete load counts as a long-scoreboard stall (the
//! completion cycle itself does not); compute phases issue one instruction
//! per busy cycle.
//!
//! Prefetch variants insert a non-blocking L2 prefetch of the warp's next
//! block (`block_idx + w`, guarded by `block_idx + w < e`) at compute-phase
//! entry: `prefetch_k` covers K blocks only, `prefetch_kv` also prefetches
//! the next V block at `compute_lv` entry. With
//! `variant.prefetch_at_load_issue` set, the prefetch moves to the load-issue
//! cycle instead.
//!
//! Thread blocks are dispatched round-robin over SMs, at most
//! `max_blocks_per_sm` resident per SM; a finishing block immediately admits
//! the next pending block on its SM. Identical scenarios produce bit-identical
//! reports.

use crate::config::{ConfigError, Scenario, VariantKind};
use crate::kvlayout::{blocks_per_sequence, build_block_table, kv_head_for_q_head, BlockTable};
use crate::memsim::{MemCounters, MemoryHierarchy, RequestId};
use serde::Serialize;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpPhase {
    IssueLoadK,
    WaitK,
    ComputeQk,
    IssueLoadV,
    WaitV,
    ComputeLv,
    Done,
}

impl WarpPhase {
    fn name(self) -> &'static str {
        match self {
            WarpPhase::IssueLoadK => "issue_load_k",
            WarpPhase::WaitK => "wait_k",
            WarpPhase::ComputeQk => "compute_qk",
            WarpPhase::IssueLoadV => "issue_load_v",
            WarpPhase::WaitV => "wait_v",
            WarpPhase::ComputeLv => "compute_lv",
            WarpPhase::Done => "done",
        }
    }
}

/// Grid shape of one kernel launch.
#[derive(Debug, Clone)]
pub struct KernelLaunch {
    /// (q_head, sequence) per thread block, in dispatch order
    /// (head index fastest, matching a [q_heads, batch] grid).
    pub thread_blocks: Vec<(u64, u64)>,
    pub warps_per_block: u64,
    pub blocks_per_sequence: u64,
}

impl KernelLaunch {
    pub fn from_scenario(s: &Scenario) -> Self {
        let mut thread_blocks = Vec::new();
        for seq in 0..s.workload.batch {
            for q_head in 0..s.model.q_heads {
                thread_blocks.push((q_head, seq));
            }
        }
        KernelLaunch {
            thread_blocks,
            warps_per_block: s.model.warps_per_block(),
            blocks_per_sequence: blocks_per_sequence(s.workload.seq_len, s.model.tokens_per_block),
        }
    }
}

/// Per-warp execution state and counters.
#[derive(Debug, Clone, Serialize)]
pub struct WarpState {
    pub thread_block: u64,
    pub warp_in_block: u64,
    pub sm: usize,
    pub phase: WarpPhase,
    pub block_idx: u64,
    pub instructions: u64,
    pub issue_cycles: u64,
    pub compute_cycles: u64,
    pub stall_long_scoreboard: u64,
    pub start_cycle: u64,
    pub end_cycle: u64,
    #[serde(skip)]
    pending_issue: u64,
    #[serde(skip)]
    pending: Option<RequestId>,
}

/// Aggregate outcome of one kernel simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub duration_cycles: u64,
    pub instructions: u64,
    pub issue_cycles: u64,
    pub compute_busy_cycles: u64,
    pub stall_long_scoreboard_cycles: u64,
    pub stall_other_cycles: u64,
    pub idle_cycles: u64,
    /// Warp slots the launch could keep resident, for throughput ratios.
    pub resident_warp_slots: u64,
    pub prefetches_issued: u64,
    pub dropped_prefetches: u64,
    pub mem: MemCounters,
    pub warps: Vec<WarpReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WarpReport {
    pub thread_block: u64,
    pub warp_in_block: u64,
    pub sm: usize,
    pub instructions: u64,
    pub issue_cycles: u64,
    pub compute_cycles: u64,
    pub stall_long_scoreboard: u64,
    pub idle_cycles: u64,
    pub start_cycle: u64,
    pub end_cycle: u64,
}

/// Start cycle assignment for a thread block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TbAssignment {
    pub thread_block: u64,
    pub sm: usize,
    pub start_cycle: u64,
}

/// Round-robin SM dispatch given per-block durations: block `j` initially
/// lands on SM `j % sm_count` while slots last, later blocks start on
/// whichever SM frees up first (ties resolved by lower block index).
pub fn schedule_thread_blocks(
    tb_count: u64,
    sm_count: u64,
    max_blocks_per_sm: u64,
    durations: &[u64],
) -> Vec<TbAssignment> {
    assert_eq!(durations.len() as u64, tb_count);
    let mut out = Vec::with_capacity(tb_count as usize);
    // (finish_cycle, tb, sm); min-heap via Reverse.
    let mut running: BinaryHeap<std::cmp::Reverse<(u64, u64, usize)>> = BinaryHeap::new();
    let mut occupancy = vec![0u64; sm_count as usize];
    let mut next = 0u64;
    while (next as usize) < durations.len()
        && running.len() < (sm_count * max_blocks_per_sm) as usize
    {
        let sm = (next % sm_count) as usize;
        debug_assert!(occupancy[sm] < max_blocks_per_sm);
        occupancy[sm] += 1;
        out.push(TbAssignment {
            thread_block: next,
            sm,
            start_cycle: 0,
        });
        running.push(std::cmp::Reverse((durations[next as usize], next, sm)));
        next += 1;
    }
    while (next as usize) < durations.len() {
        let std::cmp::Reverse((finish, _, sm)) = running.pop().expect("blocks still running");
        out.push(TbAssignment {
            thread_block: next,
            sm,
            start_cycle: finish,
        });
        running.push(std::cmp::Reverse((
            finish + durations[next as usize],
            next,
            sm,
        )));
        next += 1;
    }
    out
}

pub struct KernelSim {
    scenario: Scenario,
    launch: KernelLaunch,
    table: BlockTable,
    mem: MemoryHierarchy,
    warps: Vec<WarpState>,
    /// (cycle, warp ordinal) wakeups for issue and compute-end steps.
    wakeups: BinaryHeap<std::cmp::Reverse<(u64, u64)>>,
    waiting: HashMap<RequestId, u64>,
    pending_tbs: VecDeque<u64>,
    tb_live_warps: Vec<u64>,
    tb_sm: Vec<usize>,
    timeline: Option<Box<dyn Write + Send>>,
}

impl KernelSim {
    pub fn new(scenario: &Scenario) -> Result<Self, ConfigError> {
        scenario.validate()?;
        let launch = KernelLaunch::from_scenario(scenario);
        let table = build_block_table(&scenario.model, &scenario.hardware, &scenario.workload)?;
        let warps_per_block = launch.warps_per_block;
        let mut warps = Vec::with_capacity(launch.thread_blocks.len() * warps_per_block as usize);
        for tb in 0..launch.thread_blocks.len() as u64 {
            for w in 0..warps_per_block {
                warps.push(WarpState {
                    thread_block: tb,
                    warp_in_block: w,
                    sm: 0,
                    phase: WarpPhase::IssueLoadK,
                    block_idx: w,
                    instructions: 0,
                    issue_cycles: 0,
                    compute_cycles: 0,
                    stall_long_scoreboard: 0,
                    start_cycle: 0,
                    end_cycle: 0,
                    pending_issue: 0,
                    pending: None,
                });
            }
        }
        Ok(KernelSim {
            launch,
            table,
            mem: MemoryHierarchy::new(&scenario.hardware),
            warps,
            wakeups: BinaryHeap::new(),
            waiting: HashMap::new(),
            pending_tbs: VecDeque::new(),
            tb_live_warps: Vec::new(),
            tb_sm: Vec::new(),
            timeline: None,
            scenario: scenario.clone(),
        })
    }

    /// Memory-event trace sink (JSON lines), forwarded to the hierarchy.
    pub fn set_mem_trace(&mut self, w: Option<Box<dyn Write + Send>>) {
        self.mem.set_trace(w);
    }

    /// Per-warp phase-transition timeline sink (JSON lines
    /// `{cycle, warp, phase}`).
    pub fn set_timeline(&mut self, w: Option<Box<dyn Write + Send>>) {
        self.timeline = w;
    }

    fn record_phase(&mut self, warp_ord: u64, phase: WarpPhase, cycle: u64) {
        if let Some(w) = self.timeline.as_mut() {
            let _ = writeln!(
                w,
                "{{\"cycle\":{cycle},\"warp\":{warp_ord},\"phase\":\"{}\"}}",
                phase.name()
            );
        }
    }

    fn set_phase(&mut self, warp_ord: u64, phase: WarpPhase, cycle: u64) {
        self.warps[warp_ord as usize].phase = phase;
        self.record_phase(warp_ord, phase, cycle);
    }

    fn admit_tb(&mut self, tb: u64, sm: usize, cycle: u64) {
        debug_assert_eq!(self.tb_live_warps.len() as u64, tb);
        let wpb = self.launch.warps_per_block;
        let e = self.launch.blocks_per_sequence;
        let live = wpb.min(e); // warps with at least one block ordinal
        self.tb_sm.push(sm);
        self.tb_live_warps.push(live);
        for w in 0..wpb {
            let ord = tb * wpb + w;
            let warp = &mut self.warps[ord as usize];
            warp.sm = sm;
            warp.start_cycle = cycle;
            warp.end_cycle = cycle;
            if w < e {
                self.wakeups.push(std::cmp::Reverse((cycle, ord)));
            } else {
                warp.phase = WarpPhase::Done;
            }
        }
    }

    fn warp_addr(&self, warp_ord: u64, ordinal: u64, v_phase: bool) -> u64 {
        let warp = &self.warps[warp_ord as usize];
        let (q_head, seq) = self.launch.thread_blocks[warp.thread_block as usize];
        let kv_head = kv_head_for_q_head(q_head, &self.scenario.model);
        if v_phase {
            self.table.v_addr(seq, kv_head, ordinal)
        } else {
            self.table.k_addr(seq, kv_head, ordinal)
        }
    }

    /// Prefetch of the next block this warp will touch, if the guard
    /// `block_idx + w < e` holds and the variant calls for it.
    fn maybe_prefetch(&mut self, warp_ord: u64, v_phase: bool) {
        let kind = self.scenario.variant.kind;
        let wanted = match (kind, v_phase) {
            (VariantKind::Baseline, _) => false,
            (VariantKind::PrefetchK, v) => !v,
            (VariantKind::PrefetchKv, _) => true,
        };
        if !wanted {
            return;
        }
        let w = self.launch.warps_per_block;
        let next = self.warps[warp_ord as usize].block_idx + w;
        if next >= self.launch.blocks_per_sequence {
            return;
        }
        let addr = self.warp_addr(warp_ord, next, v_phase);
        self.mem.prefetch_l2(
            addr,
            self.table.block_bytes(),
            self.scenario.variant.eviction_priority,
        );
        self.warps[warp_ord as usize].instructions += 1;
    }

    fn issue_load(&mut self, warp_ord: u64, v_phase: bool, cycle: u64) {
        let ordinal = self.warps[warp_ord as usize].block_idx;
        let addr = self.warp_addr(warp_ord, ordinal, v_phase);
        let sm = self.warps[warp_ord as usize].sm;
        let phase = if v_phase {
            WarpPhase::IssueLoadV
        } else {
            WarpPhase::IssueLoadK
        };
        self.set_phase(warp_ord, phase, cycle);
        if self.scenario.variant.prefetch_at_load_issue {
            self.maybe_prefetch(warp_ord, v_phase);
        }
        let req = self.mem.demand_load(sm, addr, self.table.block_bytes());
        let warp = &mut self.warps[warp_ord as usize];
        warp.instructions += 1;
        warp.issue_cycles += 1;
        warp.pending = Some(req);
        warp.pending_issue = cycle;
        self.waiting.insert(req, warp_ord);
        self.set_phase(
            warp_ord,
            if v_phase {
                WarpPhase::WaitV
            } else {
                WarpPhase::WaitK
            },
            cycle,
        );
    }

    /// Load completion: account the stall window and enter the compute phase.
    fn on_complete(&mut self, warp_ord: u64, cycle: u64) {
        let v_phase = match self.warps[warp_ord as usize].phase {
            WarpPhase::WaitK => false,
            WarpPhase::WaitV => true,
            other => unreachable!("completion in phase {other:?}"),
        };
        {
            let warp = &mut self.warps[warp_ord as usize];
            warp.pending = None;
            // Cycles after the issue and before the completion cycle.
            warp.stall_long_scoreboard += cycle - warp.pending_issue - 1;
        }
        if !self.scenario.variant.prefetch_at_load_issue {
            self.maybe_prefetch(warp_ord, v_phase);
        }
        let cc = if v_phase {
            self.scenario.workload.compute_cycles_lv
        } else {
            self.scenario.workload.compute_cycles_qk
        };
        let warp = &mut self.warps[warp_ord as usize];
        warp.instructions += cc;
        warp.compute_cycles += cc;
        self.set_phase(
            warp_ord,
            if v_phase {
                WarpPhase::ComputeLv
            } else {
                WarpPhase::ComputeQk
            },
            cycle,
        );
        self.wakeups.push(std::cmp::Reverse((cycle + cc, warp_ord)));
    }

    /// Wakeup at `cycle`: either the warp's initial load issue or the end of
    /// a compute phase.
    fn step(&mut self, warp_ord: u64, cycle: u64) {
        match self.warps[warp_ord as usize].phase {
            WarpPhase::IssueLoadK => self.issue_load(warp_ord, false, cycle),
            WarpPhase::ComputeQk => self.issue_load(warp_ord, true, cycle),
            WarpPhase::ComputeLv => {
                let w = self.launch.warps_per_block;
                self.warps[warp_ord as usize].block_idx += w;
                if self.warps[warp_ord as usize].block_idx < self.launch.blocks_per_sequence {
                    self.issue_load(warp_ord, false, cycle);
                } else {
                    self.set_phase(warp_ord, WarpPhase::Done, cycle);
                    self.warps[warp_ord as usize].end_cycle = cycle;
                    self.finish_warp(warp_ord, cycle);
                }
            }
            other => unreachable!("wakeup in phase {other:?}"),
        }
    }

    fn finish_warp(&mut self, warp_ord: u64, cycle: u64) {
        let tb = self.warps[warp_ord as usize].thread_block as usize;
        self.tb_live_warps[tb] -= 1;
        if self.tb_live_warps[tb] == 0 {
            if let Some(next_tb) = self.pending_tbs.pop_front() {
                self.admit_tb(next_tb, self.tb_sm[tb], cycle);
            }
        }
    }

    pub fn run(mut self) -> SimReport {
        let sm_count = self.scenario.hardware.sm_count;
        let slots = sm_count * self.scenario.hardware.max_blocks_per_sm;
        let grid = self.launch.thread_blocks.len() as u64;
        for tb in 0..grid.min(slots) {
            self.admit_tb(tb, (tb % sm_count) as usize, 0);
        }
        self.pending_tbs.extend(grid.min(slots)..grid);

        loop {
            while self
                .wakeups
                .peek()
                .is_some_and(|&std::cmp::Reverse((cycle, _))| cycle == self.mem.clock())
            {
                let std::cmp::Reverse((cycle, ord)) = self.wakeups.pop().unwrap();
                self.step(ord, cycle);
            }
            if self.wakeups.is_empty() && self.waiting.is_empty() {
                break;
            }
            let limit = self
                .wakeups
                .peek()
                .map(|&std::cmp::Reverse((cycle, _))| cycle)
                .unwrap_or(u64::MAX);
            for done in self.mem.advance_until(limit) {
                let ord = self
                    .waiting
                    .remove(&done.request)
                    .expect("completion for a waiting warp");
                self.on_complete(ord, done.cycle);
            }
        }
        // Let dangling prefetch transfers land so byte counters are final.
        self.mem.drain();

        let duration = self.warps.iter().map(|w| w.end_cycle).max().unwrap_or(0);
        let mut report = SimReport {
            duration_cycles: duration,
            instructions: 0,
            issue_cycles: 0,
            compute_busy_cycles: 0,
            stall_long_scoreboard_cycles: 0,
            stall_other_cycles: 0,
            idle_cycles: 0,
            resident_warp_slots: grid.min(slots) * self.launch.warps_per_block,
            prefetches_issued: self.mem.counters().prefetches_issued,
            dropped_prefetches: self.mem.counters().dropped_prefetches,
            mem: *self.mem.counters(),
            warps: Vec::with_capacity(self.warps.len()),
        };
        for w in &self.warps {
            debug_assert_eq!(w.phase, WarpPhase::Done);
            let active = w.issue_cycles + w.compute_cycles + w.stall_long_scoreboard;
            debug_assert_eq!(w.end_cycle - w.start_cycle, active);
            let idle = duration - active;
            report.instructions += w.instructions;
            report.issue_cycles += w.issue_cycles;
            report.compute_busy_cycles += w.compute_cycles;
            report.stall_long_scoreboard_cycles += w.stall_long_scoreboard;
            report.idle_cycles += idle;
            report.warps.push(WarpReport {
                thread_block: w.thread_block,
                warp_in_block: w.warp_in_block,
                sm: w.sm,
                instructions: w.instructions,
                issue_cycles: w.issue_cycles,
                compute_cycles: w.compute_cycles,
                stall_long_scoreboard: w.stall_long_scoreboard,
                idle_cycles: idle,
                start_cycle: w.start_cycle,
                end_cycle: w.end_cycle,
            });
        }
        report
    }
}

/// Simulates one kernel launch to completion.
pub fn run_kernel(scenario: &Scenario) -> Result<SimReport, ConfigError> {
    Ok(KernelSim::new(scenario)?.run())
}
