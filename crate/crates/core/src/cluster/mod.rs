//! One cluster: paired PEs, their IRAMs, the banked CRAM, shared units and
//! the router port, advanced one clock at a time.
//!
//! Each cycle runs in a fixed phase order:
//!
//! 1. an arriving flit is written into CRAM (or the IRAMs) over the wide port;
//! 2. the accelerator, if any, uses whatever wide-port bandwidth is left;
//! 3. PEs issue: shared units are granted, then CRAM banks, then the send port;
//!    winners retire, losers stall;
//! 4. a granted send reads its 32-byte block and latches the outgoing flit.

mod accel;
mod arbiter;
mod cram;
mod nocif;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use accel::{AccelPorts, Accelerator, BlockSum, ACCEL_PORTS};
pub use arbiter::{CramArbiter, Grant, RoundRobin};
pub use cram::{bank_of, Cram, BLOCK_BYTES, BLOCK_WORDS};
pub use nocif::{encode_send, send_descriptor, NocInterface, SendError, SendHeader};

use crate::isa::{
    self, decode_ext, execute, ExecEffect, Instr, IsaError, MemOp, Occupancy, PeConfig, PeState,
    PeStatus, SharedUnitKind,
};
use crate::memmap;
use crate::noc::Flit;

/// Shape of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub n_pes: usize,
    /// Bytes per IRAM; one IRAM serves each PE pair.
    pub iram_bytes: u32,
    pub cram_bytes: u32,
    pub n_banks: u32,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            n_pes: 8,
            iram_bytes: 4096,
            cram_bytes: 32768,
            n_banks: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ClusterConfigError(pub String);

impl ClusterConfig {
    pub fn validate(&self) -> Result<(), ClusterConfigError> {
        let err = |m: String| Err(ClusterConfigError(m));
        if self.n_pes == 0 || !self.n_pes.is_multiple_of(2) || self.n_pes > 64 {
            return err(format!(
                "n_pes must be even and in 2..=64 (got {})",
                self.n_pes
            ));
        }
        if !self.n_banks.is_power_of_two() {
            return err(format!(
                "n_banks must be a power of two (got {})",
                self.n_banks
            ));
        }
        if self.cram_bytes == 0
            || !self.cram_bytes.is_multiple_of(self.n_banks * 4)
            || !self.cram_bytes.is_multiple_of(BLOCK_BYTES)
        {
            return err(format!(
                "cram_bytes must be a nonzero multiple of n_banks*4 and of 32 (got {})",
                self.cram_bytes
            ));
        }
        if self.cram_bytes > memmap::NOC_WINDOW_BYTES {
            return err(format!(
                "cram_bytes must not exceed {} (got {})",
                memmap::NOC_WINDOW_BYTES,
                self.cram_bytes
            ));
        }
        if self.iram_bytes == 0
            || !self.iram_bytes.is_multiple_of(BLOCK_BYTES)
            || self.iram_bytes > memmap::CRAM_BASE
        {
            return err(format!(
                "iram_bytes must be a nonzero multiple of 32 no larger than {} (got {})",
                memmap::CRAM_BASE,
                self.iram_bytes
            ));
        }
        Ok(())
    }

    pub fn n_irams(&self) -> usize {
        self.n_pes / 2
    }

    pub fn cram_blocks(&self) -> u32 {
        self.cram_bytes / BLOCK_BYTES
    }

    pub fn iram_blocks(&self) -> u32 {
        self.iram_bytes / BLOCK_BYTES
    }

    /// CRAM ports: one per PE-side bank plus eight on the wide side.
    pub fn cram_ports(&self) -> u32 {
        self.n_banks + ACCEL_PORTS
    }
}

/// Where a cluster sits and how its PEs are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterParams {
    pub x: u8,
    pub y: u8,
    pub rows: usize,
    pub cols: usize,
    pub stages: u8,
    pub has_mul: bool,
}

impl ClusterParams {
    pub fn single() -> ClusterParams {
        ClusterParams {
            x: 0,
            y: 0,
            rows: 1,
            cols: 1,
            stages: 2,
            has_mul: false,
        }
    }

    pub fn index(&self) -> usize {
        self.y as usize * self.cols + self.x as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StallCause {
    BankConflict,
    Concentrator,
    SharedUnit,
    SendBuffer,
    BranchFlush,
    LoadOccupancy,
}

impl StallCause {
    pub const ALL: [StallCause; 6] = [
        StallCause::BankConflict,
        StallCause::Concentrator,
        StallCause::SharedUnit,
        StallCause::SendBuffer,
        StallCause::BranchFlush,
        StallCause::LoadOccupancy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StallCause::BankConflict => "bank_conflict",
            StallCause::Concentrator => "concentrator",
            StallCause::SharedUnit => "shared_unit",
            StallCause::SendBuffer => "send_buffer",
            StallCause::BranchFlush => "branch_flush",
            StallCause::LoadOccupancy => "load_occupancy",
        }
    }
}

/// Non-retiring PE cycles by cause.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StallCounters {
    pub bank_conflict: u64,
    pub concentrator: u64,
    pub shared_unit: u64,
    pub send_buffer: u64,
    pub branch_flush: u64,
    pub load_occupancy: u64,
}

impl StallCounters {
    pub fn add(&mut self, cause: StallCause) {
        *self.get_mut(cause) += 1;
    }

    fn get_mut(&mut self, cause: StallCause) -> &mut u64 {
        match cause {
            StallCause::BankConflict => &mut self.bank_conflict,
            StallCause::Concentrator => &mut self.concentrator,
            StallCause::SharedUnit => &mut self.shared_unit,
            StallCause::SendBuffer => &mut self.send_buffer,
            StallCause::BranchFlush => &mut self.branch_flush,
            StallCause::LoadOccupancy => &mut self.load_occupancy,
        }
    }

    pub fn get(&self, cause: StallCause) -> u64 {
        match cause {
            StallCause::BankConflict => self.bank_conflict,
            StallCause::Concentrator => self.concentrator,
            StallCause::SharedUnit => self.shared_unit,
            StallCause::SendBuffer => self.send_buffer,
            StallCause::BranchFlush => self.branch_flush,
            StallCause::LoadOccupancy => self.load_occupancy,
        }
    }

    pub fn total(&self) -> u64 {
        StallCause::ALL.iter().map(|&c| self.get(c)).sum()
    }

    pub fn accumulate(&mut self, other: &StallCounters) {
        for c in StallCause::ALL {
            *self.get_mut(c) += other.get(c);
        }
    }
}

/// Per-PE counters. `active_cycles == retired + stalls.total()`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PeStats {
    pub retired: u64,
    pub active_cycles: u64,
    pub stalls: StallCounters,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClusterStats {
    /// Bytes moved through all CRAM ports.
    pub cram_bytes: u64,
    /// Most bytes moved in any single cycle.
    pub peak_cycle_bytes: u32,
    pub bank_grants: u64,
    pub flits_sent: u64,
    pub flits_received: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PeFault {
    #[error(transparent)]
    Isa(#[from] IsaError),
    #[error("fetch outside IRAM at {pc:#010x}")]
    FetchOutOfRange { pc: u32 },
    #[error("unmapped address {address:#010x}")]
    UnmappedAddress { address: u32 },
    #[error(transparent)]
    Send(#[from] SendError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Retire { pc: u32, instr: Instr },
    Stall { cause: StallCause },
    Halt { pc: u32 },
    Fault { pc: u32, fault: PeFault },
    Console { byte: u8 },
    Send { dest: Option<(u8, u8)>, block: u16 },
    Receive { block: u16, iram: bool },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Retire { .. } => "retire",
            EventKind::Stall { .. } => "stall",
            EventKind::Halt { .. } => "halt",
            EventKind::Fault { .. } => "fault",
            EventKind::Console { .. } => "console",
            EventKind::Send { .. } => "send",
            EventKind::Receive { .. } => "recv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterEvent {
    pub cycle: u64,
    pub cluster: (u8, u8),
    /// Global PE id; `None` for cluster-level events.
    pub pe: Option<u32>,
    pub kind: EventKind,
}

impl fmt::Display for ClusterEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycle={}", self.cycle)?;
        match self.pe {
            Some(id) => write!(f, " pe={id}")?,
            None => write!(f, " cluster={},{}", self.cluster.0, self.cluster.1)?,
        }
        write!(f, " event={}", self.kind.name())?;
        match &self.kind {
            EventKind::Retire { pc, instr } => {
                write!(
                    f,
                    " pc={pc:#06x} insn={}",
                    crate::programkit::format_instr(instr)
                )
            }
            EventKind::Stall { cause } => write!(f, " cause={}", cause.name()),
            EventKind::Halt { pc } => write!(f, " pc={pc:#06x}"),
            EventKind::Fault { pc, fault } => write!(f, " pc={pc:#06x} fault=\"{fault}\""),
            EventKind::Console { byte } => write!(f, " byte={byte}"),
            EventKind::Send { dest, block } => match dest {
                Some((x, y)) => write!(f, " dest={x},{y} block={block}"),
                None => write!(f, " dest=all block={block}"),
            },
            EventKind::Receive { block, iram } => {
                write!(
                    f,
                    " block={block} mem={}",
                    if *iram { "iram" } else { "cram" }
                )
            }
        }
    }
}

/// Which optional per-cycle events a cluster emits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceFlags {
    pub retire: bool,
    pub stall: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Busy {
    flush: u32,
    load: u32,
    shared: u32,
}

impl Busy {
    fn from_occupancy(o: Occupancy) -> Busy {
        Busy {
            flush: o.flush,
            load: o.load,
            shared: o.shared,
        }
    }

    fn total(&self) -> u32 {
        self.flush + self.load + self.shared
    }

    fn consume(&mut self) -> StallCause {
        if self.flush > 0 {
            self.flush -= 1;
            StallCause::BranchFlush
        } else if self.load > 0 {
            self.load -= 1;
            StallCause::LoadOccupancy
        } else {
            self.shared -= 1;
            StallCause::SharedUnit
        }
    }
}

#[derive(Debug, Clone)]
struct Pe {
    state: PeState,
    config: PeConfig,
    busy: Busy,
    stats: PeStats,
}

#[derive(Debug, Clone)]
struct Iram {
    words: Vec<u32>,
    decoded: Vec<Result<Instr, IsaError>>,
}

impl Iram {
    fn new(bytes: u32, has_mul: bool) -> Iram {
        let n = (bytes / 4) as usize;
        Iram {
            words: vec![0; n],
            decoded: vec![decode_ext(0, has_mul); n],
        }
    }

    fn write(&mut self, index: usize, word: u32, has_mul: bool) {
        self.words[index] = word;
        self.decoded[index] = decode_ext(word, has_mul);
    }
}

#[derive(Debug, Clone, Copy)]
enum Access {
    None,
    Cram { offset: u32 },
    PeId,
    Halt,
    Console(u8),
    Send(SendHeader),
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    instr: Instr,
    effect: ExecEffect,
    access: Access,
}

/// A simulated cluster.
pub struct Cluster {
    cfg: ClusterConfig,
    params: ClusterParams,
    pes: Vec<Pe>,
    irams: Vec<Iram>,
    cram: Cram,
    arbiter: CramArbiter,
    pair_units: Vec<RoundRobin>,
    multiplier: RoundRobin,
    send_rr: RoundRobin,
    nocif: NocInterface,
    accel: Option<Box<dyn Accelerator>>,
    stats: ClusterStats,
    cycle: u64,
    trace: TraceFlags,
    pending: Vec<Option<Pending>>,
    bank_req: Vec<Option<usize>>,
    grants: Vec<Grant>,
    unit_ok: Vec<bool>,
}

impl fmt::Debug for Cluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cluster")
            .field("at", &(self.params.x, self.params.y))
            .field("cycle", &self.cycle)
            .field(
                "pcs",
                &self.pes.iter().map(|p| p.state.pc).collect::<Vec<_>>(),
            )
            .finish_non_exhaustive()
    }
}

impl Cluster {
    pub fn new(cfg: ClusterConfig, params: ClusterParams) -> Result<Cluster, ClusterConfigError> {
        cfg.validate()?;
        if params.stages != 2 && params.stages != 3 {
            return Err(ClusterConfigError(format!(
                "stages must be 2 or 3 (got {})",
                params.stages
            )));
        }
        let first_id = (params.index() * cfg.n_pes) as u32;
        let pes = (0..cfg.n_pes)
            .map(|i| Pe {
                state: PeState::new(),
                config: PeConfig {
                    stages: params.stages,
                    has_mul: params.has_mul,
                    pe_local_index: i as u8,
                    global_pe_id: first_id + i as u32,
                },
                busy: Busy::default(),
                stats: PeStats::default(),
            })
            .collect();
        Ok(Cluster {
            cfg,
            params,
            pes,
            irams: (0..cfg.n_irams())
                .map(|_| Iram::new(cfg.iram_bytes, params.has_mul))
                .collect(),
            cram: Cram::new(cfg.cram_bytes, cfg.n_banks),
            arbiter: CramArbiter::new(cfg.n_pes, cfg.n_banks as usize),
            pair_units: vec![RoundRobin::new(); cfg.n_irams()],
            multiplier: RoundRobin::new(),
            send_rr: RoundRobin::new(),
            nocif: NocInterface::default(),
            accel: None,
            stats: ClusterStats::default(),
            cycle: 0,
            trace: TraceFlags::default(),
            pending: vec![None; cfg.n_pes],
            bank_req: vec![None; cfg.n_pes],
            grants: vec![Grant::Idle; cfg.n_pes],
            unit_ok: vec![true; cfg.n_pes],
        })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ClusterParams {
        &self.params
    }

    pub fn coords(&self) -> (u8, u8) {
        (self.params.x, self.params.y)
    }

    pub fn cycle_count(&self) -> u64 {
        self.cycle
    }

    pub fn n_pes(&self) -> usize {
        self.pes.len()
    }

    pub fn pe(&self, i: usize) -> &PeState {
        &self.pes[i].state
    }

    pub fn pe_config(&self, i: usize) -> &PeConfig {
        &self.pes[i].config
    }

    pub fn pe_stats(&self, i: usize) -> &PeStats {
        &self.pes[i].stats
    }

    pub fn stats(&self) -> &ClusterStats {
        &self.stats
    }

    pub fn cram(&self) -> &Cram {
        &self.cram
    }

    pub fn cram_mut(&mut self) -> &mut Cram {
        &mut self.cram
    }

    pub fn iram(&self, k: usize) -> &[u32] {
        &self.irams[k].words
    }

    /// Grants of the most recent cycle, per PE.
    pub fn last_grants(&self) -> &[Grant] {
        &self.grants
    }

    pub fn set_trace(&mut self, flags: TraceFlags) {
        self.trace = flags;
    }

    pub fn attach_accelerator(&mut self, accel: Box<dyn Accelerator>) {
        self.accel = Some(accel);
    }

    pub fn outgoing(&self) -> Option<&Flit> {
        self.nocif.outgoing.as_ref()
    }

    pub fn take_outgoing(&mut self) -> Option<Flit> {
        self.nocif.outgoing.take()
    }

    /// Puts back a flit the router refused.
    pub fn restore_outgoing(&mut self, flit: Flit) {
        debug_assert!(self.nocif.outgoing.is_none());
        self.nocif.outgoing = Some(flit);
    }

    pub fn noc_interface(&self) -> &NocInterface {
        &self.nocif
    }

    /// True when no PE is running.
    pub fn all_stopped(&self) -> bool {
        self.pes.iter().all(|p| p.state.status != PeStatus::Running)
    }

    /// Writes `words` at word offset zero of every IRAM.
    pub fn load_iram(&mut self, words: &[u32]) {
        assert!(
            words.len() * 4 <= self.cfg.iram_bytes as usize,
            "image exceeds IRAM"
        );
        for iram in &mut self.irams {
            for (i, &w) in words.iter().enumerate() {
                iram.write(i, w, self.params.has_mul);
            }
        }
    }

    /// Writes one 32-byte block into every IRAM.
    pub fn write_iram_block(&mut self, block: u32, words: &[u32; BLOCK_WORDS]) {
        assert!(block < self.cfg.iram_blocks());
        let base = block as usize * BLOCK_WORDS;
        for iram in &mut self.irams {
            for (i, &w) in words.iter().enumerate() {
                iram.write(base + i, w, self.params.has_mul);
            }
        }
    }

    /// Takes every PE out of reset (or restarts it) at `entry`.
    pub fn release(&mut self, entry: u32) {
        for pe in &mut self.pes {
            pe.state = PeState::new();
            pe.state.pc = entry;
            pe.state.status = PeStatus::Running;
            pe.busy = Busy::default();
        }
    }

    /// Stops one PE, holding it in reset.
    pub fn hold_in_reset(&mut self, i: usize) {
        self.pes[i].state.status = PeStatus::Reset;
    }

    fn event(&self, pe: Option<usize>, kind: EventKind) -> ClusterEvent {
        ClusterEvent {
            cycle: self.cycle,
            cluster: (self.params.x, self.params.y),
            pe: pe.map(|i| self.pes[i].config.global_pe_id),
            kind,
        }
    }

    /// Advances the cluster by one clock. A latched send is left in the
    /// outgoing buffer for the router.
    pub fn cycle(&mut self, incoming: Option<Flit>, events: &mut Vec<ClusterEvent>) {
        let mut wide_port_busy = false;
        let mut bytes = 0u32;

        if let Some(flit) = incoming {
            self.receive(flit, events);
            wide_port_busy = true;
            bytes += BLOCK_BYTES;
        }

        if let Some(accel) = self.accel.as_mut() {
            let budget = if wide_port_busy { 0 } else { ACCEL_PORTS };
            let mut ports = AccelPorts::new(&mut self.cram, budget);
            accel.cycle(&mut ports);
            if ports.used() > 0 {
                wide_port_busy = true;
                bytes += 4 * ports.used();
            }
        }

        if !self.all_stopped() {
            if let Some((pe, header)) = self.step_pes(wide_port_busy, events, &mut bytes) {
                self.latch_send(pe, header, events);
                bytes += BLOCK_BYTES;
            }
        } else {
            self.grants.iter_mut().for_each(|g| *g = Grant::Idle);
        }

        self.stats.cram_bytes += u64::from(bytes);
        self.stats.peak_cycle_bytes = self.stats.peak_cycle_bytes.max(bytes);
        self.cycle += 1;
    }

    fn receive(&mut self, flit: Flit, events: &mut Vec<ClusterEvent>) {
        let words = flit.payload_words();
        let block = u32::from(flit.dest_block);
        if flit.iram {
            self.write_iram_block(block, &words);
        } else {
            self.cram.write_block(block, &words);
        }
        self.stats.flits_received += 1;
        let ev = self.event(
            None,
            EventKind::Receive {
                block: flit.dest_block,
                iram: flit.iram,
            },
        );
        events.push(ev);
    }

    fn latch_send(&mut self, pe: usize, h: SendHeader, events: &mut Vec<ClusterEvent>) {
        let words = self.cram.read_block(h.src_block);
        let payload = Flit::payload_from_words(&words);
        let mut flit = if h.multicast {
            Flit::broadcast(h.dest_block, payload)
        } else {
            Flit::unicast(h.dest_x, h.dest_y, h.dest_block, payload)
        };
        flit.src_x = self.params.x;
        flit.src_y = self.params.y;
        self.nocif.outgoing = Some(flit);
        self.stats.flits_sent += 1;
        let dest = (!h.multicast).then_some((h.dest_x, h.dest_y));
        let ev = self.event(
            Some(pe),
            EventKind::Send {
                dest,
                block: h.dest_block,
            },
        );
        events.push(ev);
    }

    /// Fetch, execute and classify the next instruction of PE `i`.
    fn prepare(&self, i: usize) -> Result<Pending, PeFault> {
        let st = &self.pes[i].state;
        let pc = st.pc;
        if !pc.is_multiple_of(4) {
            return Err(IsaError::MisalignedFetch { target: pc }.into());
        }
        if pc >= self.cfg.iram_bytes {
            return Err(PeFault::FetchOutOfRange { pc });
        }
        let instr = self.irams[i / 2].decoded[(pc / 4) as usize].clone()?;
        let effect = execute(st, &instr, None)?;

        let access = if let Some(req) = effect.mem_req {
            match memmap::cram_offset(req.address, self.cfg.cram_bytes) {
                Some(offset) => Access::Cram { offset },
                None => {
                    return Err(PeFault::UnmappedAddress {
                        address: req.address,
                    })
                }
            }
        } else if let Some(req) = effect.mmio_req {
            let unmapped = PeFault::UnmappedAddress {
                address: req.address,
            };
            if req.width != isa::AccessWidth::Word {
                return Err(unmapped);
            }
            match (req.op, req.address) {
                (MemOp::Store, a) if memmap::in_noc_window(a) => Access::Send(encode_send(
                    a,
                    req.data,
                    self.params.rows,
                    self.params.cols,
                    self.cfg.cram_blocks(),
                )?),
                (MemOp::Store, memmap::HALT_ADDR) => Access::Halt,
                (MemOp::Store, memmap::TRACE_ADDR) => Access::Console(req.data as u8),
                (MemOp::Load, memmap::PE_ID_ADDR) => Access::PeId,
                _ => return Err(unmapped),
            }
        } else {
            Access::None
        };
        Ok(Pending {
            instr,
            effect,
            access,
        })
    }

    fn fault(&mut self, i: usize, fault: PeFault, events: &mut Vec<ClusterEvent>) {
        let pc = self.pes[i].state.pc;
        self.pes[i].state.status = PeStatus::Faulted;
        let ev = self.event(Some(i), EventKind::Fault { pc, fault });
        events.push(ev);
    }

    fn stall(&mut self, i: usize, cause: StallCause, events: &mut Vec<ClusterEvent>) {
        let pe = &mut self.pes[i];
        pe.stats.active_cycles += 1;
        pe.stats.stalls.add(cause);
        if self.trace.stall {
            let ev = self.event(Some(i), EventKind::Stall { cause });
            events.push(ev);
        }
    }

    /// Phase 3. Returns the PE whose send was granted, if any.
    fn step_pes(
        &mut self,
        wide_port_busy: bool,
        events: &mut Vec<ClusterEvent>,
        bytes: &mut u32,
    ) -> Option<(usize, SendHeader)> {
        let n = self.pes.len();

        for i in 0..n {
            self.pending[i] = None;
            self.bank_req[i] = None;
            self.unit_ok[i] = true;
            if self.pes[i].state.status != PeStatus::Running {
                continue;
            }
            if self.pes[i].busy.total() > 0 {
                let cause = self.pes[i].busy.consume();
                self.pes[i].state.stall_cycles_remaining = self.pes[i].busy.total();
                self.stall(i, cause, events);
                continue;
            }
            match self.prepare(i) {
                Ok(p) => self.pending[i] = Some(p),
                Err(fault) => self.fault(i, fault, events),
            }
        }

        // Shared units: one shifter/subword unit per pair, one multiplier.
        let unit_of = |p: &Option<Pending>| p.as_ref().and_then(|p| p.effect.shared_unit);
        for (k, rr) in self.pair_units.iter_mut().enumerate() {
            let pending = &self.pending;
            let wants = |j: usize| {
                matches!(
                    unit_of(&pending[2 * k + j]),
                    Some(SharedUnitKind::Shifter | SharedUnitKind::Subword)
                )
            };
            let winner = rr.pick(2, wants);
            for j in 0..2 {
                if wants(j) && winner != Some(j) {
                    self.unit_ok[2 * k + j] = false;
                }
            }
        }
        {
            let pending = &self.pending;
            let wants = |i: usize| unit_of(&pending[i]) == Some(SharedUnitKind::Multiplier);
            let winner = self.multiplier.pick(n, wants);
            for i in 0..n {
                if wants(i) && winner != Some(i) {
                    self.unit_ok[i] = false;
                }
            }
        }

        // CRAM banks.
        let n_banks = self.cfg.n_banks;
        for i in 0..n {
            if let Some(Pending {
                access: Access::Cram { offset },
                ..
            }) = self.pending[i]
            {
                if self.unit_ok[i] {
                    self.bank_req[i] = Some(bank_of(offset, n_banks));
                }
            }
        }
        self.arbiter.arbitrate(&self.bank_req, &mut self.grants);

        // Send port.
        let send_open = !wide_port_busy && self.nocif.outgoing.is_none();
        let pending = &self.pending;
        let is_send = |i: usize| {
            matches!(
                pending[i],
                Some(Pending {
                    access: Access::Send(_),
                    ..
                })
            )
        };
        let send_winner = if send_open {
            self.send_rr.pick(n, is_send)
        } else {
            None
        };
        self.nocif.send_stall = (0..n).any(|i| is_send(i) && send_winner != Some(i));

        let mut granted_send = None;
        for i in 0..n {
            let Some(p) = self.pending[i].take() else {
                continue;
            };
            let stalled = if !self.unit_ok[i] {
                Some(StallCause::SharedUnit)
            } else {
                match p.access {
                    Access::Cram { .. } => match self.grants[i] {
                        Grant::Granted => None,
                        Grant::LostConcentrator => Some(StallCause::Concentrator),
                        _ => Some(StallCause::BankConflict),
                    },
                    Access::Send(_) if send_winner != Some(i) => Some(StallCause::SendBuffer),
                    _ => None,
                }
            };
            if let Some(cause) = stalled {
                self.stall(i, cause, events);
                continue;
            }
            if let Access::Send(h) = p.access {
                granted_send = Some((i, h));
            }
            if matches!(p.access, Access::Cram { .. }) {
                *bytes += 4;
                self.stats.bank_grants += 1;
            }
            self.commit(i, p, events);
        }
        granted_send
    }

    fn commit(&mut self, i: usize, p: Pending, events: &mut Vec<ClusterEvent>) {
        let global_id = self.pes[i].config.global_pe_id;
        let reexec = |st: &PeState, data: u32| {
            execute(st, &p.instr, Some(data)).expect("re-execution with load data cannot fail")
        };
        let mut effect = p.effect;
        let mut halt = effect.halt_req;
        match p.access {
            Access::Cram { offset } => {
                let req = effect.mem_req.expect("CRAM access without request");
                let word = self.cram.read(offset);
                match req.op {
                    MemOp::Load => effect = reexec(&self.pes[i].state, word),
                    MemOp::Store => self.cram.write(offset, req.merge(word)),
                }
            }
            Access::PeId => effect = reexec(&self.pes[i].state, global_id),
            Access::Halt => halt = true,
            Access::Console(byte) => {
                let ev = self.event(Some(i), EventKind::Console { byte });
                events.push(ev);
            }
            Access::Send(_) | Access::None => {}
        }

        let pe = &mut self.pes[i];
        let pc = pe.state.pc;
        if let Some((rd, v)) = effect.reg_write {
            pe.state.set_reg(rd, v);
        }
        pe.state.pc = effect.next_pc;
        pe.state.retired += 1;
        pe.stats.retired += 1;
        pe.stats.active_cycles += 1;
        pe.busy = Busy::from_occupancy(isa::occupancy(&p.instr, &effect, &pe.config));
        pe.state.stall_cycles_remaining = pe.busy.total();
        if halt {
            pe.state.status = PeStatus::Halted;
            pe.busy = Busy::default();
            pe.state.stall_cycles_remaining = 0;
        }
        if self.trace.retire {
            let ev = self.event(Some(i), EventKind::Retire { pc, instr: p.instr });
            events.push(ev);
        }
        if halt {
            let ev = self.event(Some(i), EventKind::Halt { pc });
            events.push(ev);
        }
    }
}
