//! The full machine: a grid of clusters on the torus NOC, the global cycle
//! loop, measured metrics and the analytic peak model.
//!
//! One global cycle advances every cluster (concurrently when a thread pool
//! is configured) and then steps the network once. A flit delivered by the
//! network in cycle `t` is written into its cluster in cycle `t + 1`; a flit
//! latched by a send in cycle `t` is offered to the router in the same
//! cycle's network step.

mod analytic;
mod config;
mod echo;
mod report;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

pub use analytic::{analytic_peaks, AnalyticModel};
pub use config::{InvalidConfig, SystemConfig};
pub use echo::{echo_kernel_source, EchoLayout};
pub use report::{FaultRecord, LinkReport, Metrics, PeReport, Report};

use crate::cluster::{Cluster, ClusterEvent, ClusterParams, EventKind, TraceFlags};
use crate::isa::{PeState, PeStatus};
use crate::noc::{Flit, Noc, Topology};

/// Which events go to the trace stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraceKinds {
    pub retire: bool,
    pub stall: bool,
    pub halt: bool,
    pub fault: bool,
    pub console: bool,
    pub send: bool,
    pub recv: bool,
    pub noc: bool,
}

impl TraceKinds {
    pub const NAMES: [&'static str; 8] = [
        "retire", "stall", "halt", "fault", "console", "send", "recv", "noc",
    ];

    pub fn all() -> TraceKinds {
        TraceKinds {
            retire: true,
            stall: true,
            halt: true,
            fault: true,
            console: true,
            send: true,
            recv: true,
            noc: true,
        }
    }

    /// Parses a comma-separated list of kinds, or `all`.
    pub fn parse(list: &str) -> Result<TraceKinds, String> {
        let mut k = TraceKinds::default();
        for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "all" => k = TraceKinds::all(),
                "retire" => k.retire = true,
                "stall" => k.stall = true,
                "halt" => k.halt = true,
                "fault" => k.fault = true,
                "console" => k.console = true,
                "send" => k.send = true,
                "recv" => k.recv = true,
                "noc" => k.noc = true,
                other => {
                    return Err(format!(
                        "unknown trace kind `{other}` (expected {} or all)",
                        Self::NAMES.join(", ")
                    ))
                }
            }
        }
        Ok(k)
    }

    fn wants(&self, kind: &EventKind) -> bool {
        match kind {
            EventKind::Retire { .. } => self.retire,
            EventKind::Stall { .. } => self.stall,
            EventKind::Halt { .. } => self.halt,
            EventKind::Fault { .. } => self.fault,
            EventKind::Console { .. } => self.console,
            EventKind::Send { .. } => self.send,
            EventKind::Receive { .. } => self.recv,
        }
    }

    fn any(&self) -> bool {
        *self != TraceKinds::default()
    }
}

/// When `run` stops.
pub enum HaltCondition<'a> {
    /// Every PE halted or faulted and no message left anywhere.
    AllHalted,
    /// Stop once the global cycle count reaches this value.
    CycleLimit(u64),
    /// Stop when the predicate holds, checked before each cycle.
    Predicate(Box<dyn FnMut(&System) -> bool + 'a>),
}

impl fmt::Debug for HaltCondition<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HaltCondition::AllHalted => f.write_str("AllHalted"),
            HaltCondition::CycleLimit(n) => write!(f, "CycleLimit({n})"),
            HaltCondition::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("watchdog expired after {} cycles", .report.cycles)]
    WatchdogExpired { report: Box<Report> },
    #[error("trace output failed: {0}")]
    Trace(#[from] std::io::Error),
}

/// A built machine.
pub struct System {
    cfg: SystemConfig,
    topo: Topology,
    clusters: Vec<Cluster>,
    noc: Noc,
    /// Deliveries waiting to be written into their cluster next cycle.
    arriving: Vec<Option<Flit>>,
    injections: Vec<Option<Flit>>,
    deliveries: Vec<Option<Flit>>,
    events: Vec<Vec<ClusterEvent>>,
    loader: VecDeque<Flit>,
    loader_first_inject: Option<u64>,
    last_delivery: Option<u64>,
    cycle: u64,
    console: BTreeMap<u32, String>,
    faults: Vec<FaultRecord>,
    trace_kinds: TraceKinds,
    trace: Option<Box<dyn Write + Send>>,
    pool: Option<rayon::ThreadPool>,
}

impl fmt::Debug for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("System")
            .field("rows", &self.cfg.rows)
            .field("cols", &self.cfg.cols)
            .field("cycle", &self.cycle)
            .finish_non_exhaustive()
    }
}

impl System {
    /// Builds the machine with every PE held in reset and all memories zeroed.
    pub fn build(cfg: SystemConfig) -> Result<System, InvalidConfig> {
        cfg.validate()?;
        let topo = Topology::new(cfg.rows, cfg.cols).map_err(|e| InvalidConfig(e.to_string()))?;
        let n = topo.len();
        let clusters = (0..n)
            .map(|i| {
                let (x, y) = topo.coords(i);
                let params = ClusterParams {
                    x: x as u8,
                    y: y as u8,
                    rows: cfg.rows,
                    cols: cfg.cols,
                    stages: cfg.stages,
                    has_mul: cfg.has_mul,
                };
                Cluster::new(cfg.cluster, params).map_err(|e| InvalidConfig(e.0))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(System {
            cfg,
            topo,
            clusters,
            noc: Noc::new(topo),
            arriving: vec![None; n],
            injections: vec![None; n],
            deliveries: vec![None; n],
            events: vec![Vec::new(); n],
            loader: VecDeque::new(),
            loader_first_inject: None,
            last_delivery: None,
            cycle: 0,
            console: BTreeMap::new(),
            faults: Vec::new(),
            trace_kinds: TraceKinds::default(),
            trace: None,
            pool: None,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn noc(&self) -> &Noc {
        &self.noc
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, x: usize, y: usize) -> &Cluster {
        &self.clusters[self.topo.index(x, y)]
    }

    pub fn cluster_mut(&mut self, x: usize, y: usize) -> &mut Cluster {
        let i = self.topo.index(x, y);
        &mut self.clusters[i]
    }

    /// State of the PE with global id `id`.
    pub fn pe(&self, id: usize) -> &PeState {
        let n = self.cfg.cluster.n_pes;
        self.clusters[id / n].pe(id % n)
    }

    /// Bytes written by each PE to the trace-character port.
    pub fn console(&self) -> &BTreeMap<u32, String> {
        &self.console
    }

    pub fn faults(&self) -> &[FaultRecord] {
        &self.faults
    }

    /// Evaluates clusters on `threads` worker threads; 0 or 1 means inline.
    /// Results do not depend on the setting.
    pub fn set_threads(&mut self, threads: usize) {
        self.pool = if threads > 1 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .ok()
        } else {
            None
        };
    }

    /// Sends the selected event kinds to `sink`, one line per event.
    pub fn set_trace(&mut self, kinds: TraceKinds, sink: Box<dyn Write + Send>) {
        self.trace_kinds = kinds;
        self.trace = kinds.any().then_some(sink);
        let flags = TraceFlags {
            retire: kinds.retire,
            stall: kinds.stall,
        };
        for c in &mut self.clusters {
            c.set_trace(flags);
        }
        self.noc.set_tracing(kinds.noc);
    }

    /// Writes `words` straight into every IRAM of cluster `(x, y)`, bypassing
    /// the network.
    pub fn write_iram_direct(&mut self, x: usize, y: usize, words: &[u32]) {
        self.cluster_mut(x, y).load_iram(words);
    }

    pub fn release_all(&mut self, entry: u32) {
        for c in &mut self.clusters {
            c.release(entry);
        }
    }

    pub fn release_cluster(&mut self, x: usize, y: usize, entry: u32) {
        self.cluster_mut(x, y).release(entry);
    }

    /// Queues flits on the loader client at router (0,0); they are offered
    /// whenever cluster (0,0) is not using the port.
    pub fn queue_loader_flits(&mut self, flits: impl IntoIterator<Item = Flit>) {
        self.loader.extend(flits);
        self.loader_first_inject = None;
        self.last_delivery = None;
    }

    /// Cycle of the loader's first accepted injection and of the most recent
    /// delivery, as counted by the network.
    pub fn loader_window(&self) -> Option<(u64, u64)> {
        Some((self.loader_first_inject?, self.last_delivery?))
    }

    /// No flit anywhere: not queued, latched, in flight or awaiting write.
    pub fn network_idle(&self) -> bool {
        self.loader.is_empty()
            && self.noc.is_quiet()
            && self.arriving.iter().all(Option::is_none)
            && self.clusters.iter().all(|c| c.outgoing().is_none())
    }

    pub fn all_halted(&self) -> bool {
        self.clusters.iter().all(Cluster::all_stopped) && self.network_idle()
    }

    /// Advances the machine by one global cycle.
    pub fn step(&mut self) -> std::io::Result<()> {
        let arriving = &mut self.arriving;
        let events = &mut self.events;
        let work = |(c, (a, ev)): (&mut Cluster, (&mut Option<Flit>, &mut Vec<ClusterEvent>))| {
            ev.clear();
            c.cycle(a.take(), ev);
        };
        match &self.pool {
            Some(pool) => pool.install(|| {
                self.clusters
                    .par_iter_mut()
                    .zip(arriving.par_iter_mut().zip(events.par_iter_mut()))
                    .for_each(work)
            }),
            None => self
                .clusters
                .iter_mut()
                .zip(arriving.iter_mut().zip(events.iter_mut()))
                .for_each(work),
        }

        for (slot, c) in self.injections.iter_mut().zip(&mut self.clusters) {
            *slot = c.take_outgoing();
        }
        let loader_offered = self.injections[0].is_none() && !self.loader.is_empty();
        if loader_offered {
            self.injections[0] = self.loader.pop_front();
        }

        let noc_cycle = self.noc.cycle();
        self.noc.step(&mut self.injections, &mut self.deliveries);

        if loader_offered {
            match self.injections[0].take() {
                Some(refused) => self.loader.push_front(refused),
                None => {
                    self.loader_first_inject.get_or_insert(noc_cycle);
                }
            }
        }
        for (slot, c) in self.injections.iter_mut().zip(&mut self.clusters) {
            if let Some(refused) = slot.take() {
                c.restore_outgoing(refused);
            }
        }
        let mut delivered = false;
        for (d, a) in self.deliveries.iter_mut().zip(&mut self.arriving) {
            if let Some(f) = d.take() {
                *a = Some(f);
                delivered = true;
            }
        }
        if delivered {
            self.last_delivery = Some(noc_cycle);
        }

        self.absorb_events()?;
        if self.trace_kinds.noc {
            let records = self.noc.take_trace();
            if let Some(out) = self.trace.as_mut() {
                for r in records {
                    writeln!(out, "{}", r.to_line())?;
                }
            }
        }
        self.cycle += 1;
        Ok(())
    }

    fn absorb_events(&mut self) -> std::io::Result<()> {
        for ev in self.events.iter().flatten() {
            match &ev.kind {
                EventKind::Console { byte } => {
                    let pe = ev.pe.unwrap_or_default();
                    self.console.entry(pe).or_default().push(char::from(*byte));
                }
                EventKind::Fault { pc, fault } => self.faults.push(FaultRecord {
                    cycle: ev.cycle,
                    pe: ev.pe.unwrap_or_default(),
                    pc: *pc,
                    error: fault.to_string(),
                }),
                _ => {}
            }
            if self.trace_kinds.wants(&ev.kind) {
                if let Some(out) = self.trace.as_mut() {
                    writeln!(out, "{ev}")?;
                }
            }
        }
        Ok(())
    }

    /// Runs until `cond` holds or the watchdog fires.
    pub fn run(&mut self, mut cond: HaltCondition<'_>) -> Result<Report, RunError> {
        let reason = loop {
            let stop = match &mut cond {
                HaltCondition::AllHalted => self.all_halted().then_some("all_halted"),
                HaltCondition::CycleLimit(n) => (self.cycle >= *n).then_some("cycle_limit"),
                HaltCondition::Predicate(p) => p(self).then_some("predicate"),
            };
            if let Some(reason) = stop {
                break reason;
            }
            if self.cycle >= self.cfg.max_cycles {
                if let Some(out) = self.trace.as_mut() {
                    out.flush()?;
                }
                return Err(RunError::WatchdogExpired {
                    report: Box::new(self.report("watchdog")),
                });
            }
            self.step()?;
        };
        if let Some(out) = self.trace.as_mut() {
            out.flush()?;
        }
        Ok(self.report(reason))
    }

    /// Snapshot of every counter.
    pub fn report(&self, halt_reason: &str) -> Report {
        report::build(self, halt_reason)
    }

    pub(crate) fn status_counts(&self) -> (usize, usize) {
        let mut halted = 0;
        let mut faulted = 0;
        for c in &self.clusters {
            for i in 0..c.n_pes() {
                match c.pe(i).status {
                    PeStatus::Halted => halted += 1,
                    PeStatus::Faulted => faulted += 1,
                    _ => {}
                }
            }
        }
        (halted, faulted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::programkit::assemble;

    fn single_with(src: &str) -> System {
        let mut s = System::build(SystemConfig::single_cluster()).unwrap();
        s.write_iram_direct(0, 0, assemble(src).unwrap().words());
        s
    }

    #[test]
    fn idle_system_returns_at_cycle_zero() {
        let mut s = System::build(SystemConfig::default()).unwrap();
        let r = s.run(HaltCondition::AllHalted).unwrap();
        assert_eq!(r.cycles, 0);
        assert_eq!(r.halt_reason, "all_halted");
    }

    #[test]
    fn build_rejects_zero_rows() {
        let cfg = SystemConfig {
            rows: 0,
            ..Default::default()
        };
        assert!(System::build(cfg).is_err());
    }

    #[test]
    fn straight_line_alu_kernel() {
        let body: String = (1..=10).map(|i| format!("addi x{i}, x0, {i}\n")).collect();
        let mut s = single_with(&format!("{body}halt\n"));
        s.release_cluster(0, 0, 0);
        for i in 1..8 {
            s.cluster_mut(0, 0).hold_in_reset(i);
        }
        let r = s.run(HaltCondition::AllHalted).unwrap();
        assert_eq!(r.pes[0].retired, 11);
        assert_eq!(r.pes[0].active_cycles, 11);
        assert_eq!(r.measured.cpi, 1.0);
        assert_eq!(s.pe(0).regs[10], 10);
    }

    #[test]
    fn watchdog_carries_snapshot() {
        let mut s = single_with("spin: j spin\n");
        s.release_all(0);
        let cfg_cycles = 50;
        s.cfg.max_cycles = cfg_cycles;
        match s.run(HaltCondition::AllHalted) {
            Err(RunError::WatchdogExpired { report }) => {
                assert_eq!(report.cycles, cfg_cycles);
                assert_eq!(report.halt_reason, "watchdog");
                assert!(report.measured.retired > 0);
            }
            other => panic!("expected watchdog, got {other:?}"),
        }
    }

    #[test]
    fn cycle_limit_and_predicate() {
        let mut s = single_with("spin: j spin\n");
        s.release_all(0);
        let r = s.run(HaltCondition::CycleLimit(30)).unwrap();
        assert_eq!(r.cycles, 30);
        let r = s
            .run(HaltCondition::Predicate(Box::new(|s: &System| {
                s.pe(3).retired >= 20
            })))
            .unwrap();
        assert_eq!(r.halt_reason, "predicate");
        assert_eq!(s.pe(3).retired, 20);
    }

    #[test]
    fn trace_lines_are_greppable() {
        use std::sync::{Arc, Mutex};
        #[derive(Clone, Default)]
        struct Shared(Arc<Mutex<Vec<u8>>>);
        impl Write for Shared {
            fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(b);
                Ok(b.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let buf = Shared::default();
        let mut s = single_with("li t0, 'A'\nsw t0, -12(x0)\nhalt\n");
        s.set_trace(
            TraceKinds::parse("retire,console,halt").unwrap(),
            Box::new(buf.clone()),
        );
        s.release_all(0);
        s.run(HaltCondition::AllHalted).unwrap();
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        assert!(
            text.contains("cycle=0 pe=0 event=retire pc=0x0000 insn=addi x5, x0, 65"),
            "{text}"
        );
        assert!(text.contains("pe=7 event=console byte=65"), "{text}");
        assert_eq!(text.lines().filter(|l| l.contains("event=halt")).count(), 8);
        assert!(text.lines().all(|l| l.starts_with("cycle=")));
        assert_eq!(s.console()[&7], "A");
        assert!(TraceKinds::parse("bogus").is_err());
    }
}
