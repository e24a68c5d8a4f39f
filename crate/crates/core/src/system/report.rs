use std::collections::BTreeMap;

use serde::Serialize;

use super::{analytic_peaks, AnalyticModel, System, SystemConfig};
use crate::cluster::StallCounters;
use crate::isa::PeStatus;
use crate::noc::{NocCounters, LINK_BITS, PAYLOAD_BITS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FaultRecord {
    pub cycle: u64,
    pub pe: u32,
    pub pc: u32,
    pub error: String,
}

/// Aggregate measured counters and rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub retired: u64,
    pub active_cycles: u64,
    /// Active PE cycles per retired instruction, over all PEs.
    pub cpi: f64,
    /// Retired instructions per second at `fclk_hz`, in millions.
    pub mips: f64,
    pub stalls: StallCounters,
    pub cram_bytes: u64,
    pub cram_bytes_per_cycle: f64,
    /// Largest number of bytes any one cluster moved through its CRAM in one cycle.
    pub peak_cluster_cycle_bytes: u32,
    pub flits_sent: u64,
    pub flits_received: u64,
    pub noc: NocCounters,
    /// Payload bits delivered per second, in Gb/s.
    pub delivered_gbits_per_s: f64,
    pub bisection_gbits_per_s: f64,
    /// Deflections per link traversal.
    pub deflection_rate: f64,
    pub halted_pes: usize,
    pub faulted_pes: usize,
    pub faults: Vec<FaultRecord>,
    /// Characters written to the trace port, by global PE id.
    pub console: BTreeMap<u32, String>,
    pub console_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeReport {
    pub id: u32,
    pub x: u8,
    pub y: u8,
    pub local: u8,
    pub status: &'static str,
    pub pc: u32,
    pub retired: u64,
    pub active_cycles: u64,
    pub cpi: f64,
    pub stalls: StallCounters,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub x: u8,
    pub y: u8,
    pub ring: &'static str,
    pub flits: u64,
    /// Fraction of cycles the link carried a flit.
    pub utilization: f64,
}

/// Everything a run produced, serialized as the stats file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: SystemConfig,
    pub cycles: u64,
    pub halt_reason: String,
    pub measured: Metrics,
    pub analytic: AnalyticModel,
    pub pes: Vec<PeReport>,
    pub links: Vec<LinkReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// CPI of the given PEs taken together.
    pub fn cpi_of(&self, ids: impl IntoIterator<Item = usize>) -> f64 {
        let (a, r) = ids.into_iter().fold((0, 0), |(a, r), i| {
            (a + self.pes[i].active_cycles, r + self.pes[i].retired)
        });
        ratio(a as f64, r as f64)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn status_name(s: PeStatus) -> &'static str {
    match s {
        PeStatus::Reset => "reset",
        PeStatus::Running => "running",
        PeStatus::Halted => "halted",
        PeStatus::Faulted => "faulted",
    }
}

pub(super) fn build(sys: &System, halt_reason: &str) -> Report {
    let cfg = *sys.config();
    let cycles = sys.cycle();
    let per_second = |count: f64| ratio(count, cycles as f64) * cfg.fclk_hz;

    let mut pes = Vec::with_capacity(cfg.n_pes());
    let mut stalls = StallCounters::default();
    let (mut retired, mut active) = (0u64, 0u64);
    let (mut cram_bytes, mut peak, mut sent, mut received) = (0u64, 0u32, 0u64, 0u64);
    for c in sys.clusters() {
        let (x, y) = c.coords();
        let cs = c.stats();
        cram_bytes += cs.cram_bytes;
        peak = peak.max(cs.peak_cycle_bytes);
        sent += cs.flits_sent;
        received += cs.flits_received;
        for i in 0..c.n_pes() {
            let st = c.pe(i);
            let ps = c.pe_stats(i);
            retired += ps.retired;
            active += ps.active_cycles;
            stalls.accumulate(&ps.stalls);
            pes.push(PeReport {
                id: c.pe_config(i).global_pe_id,
                x,
                y,
                local: i as u8,
                status: status_name(st.status),
                pc: st.pc,
                retired: ps.retired,
                active_cycles: ps.active_cycles,
                cpi: ratio(ps.active_cycles as f64, ps.retired as f64),
                stalls: ps.stalls,
            });
        }
    }

    let topo = sys.topology();
    let links = sys
        .noc()
        .link_flits()
        .iter()
        .enumerate()
        .map(|(k, &flits)| {
            let (x, y) = topo.coords(k / 2);
            LinkReport {
                x: x as u8,
                y: y as u8,
                ring: if k % 2 == 0 { "x" } else { "y" },
                flits,
                utilization: ratio(flits as f64, cycles as f64),
            }
        })
        .collect();

    let noc = *sys.noc().counters();
    let (halted_pes, faulted_pes) = sys.status_counts();
    let console = sys.console().clone();
    let console_bytes = console.values().map(String::len).sum();
    Report {
        config: cfg,
        cycles,
        halt_reason: halt_reason.to_string(),
        measured: Metrics {
            retired,
            active_cycles: active,
            cpi: ratio(active as f64, retired as f64),
            mips: per_second(retired as f64) / 1e6,
            stalls,
            cram_bytes,
            cram_bytes_per_cycle: ratio(cram_bytes as f64, cycles as f64),
            peak_cluster_cycle_bytes: peak,
            flits_sent: sent,
            flits_received: received,
            noc,
            delivered_gbits_per_s: per_second((noc.deliveries * u64::from(PAYLOAD_BITS)) as f64)
                / 1e9,
            bisection_gbits_per_s: per_second(
                (noc.bisection_traversals * u64::from(LINK_BITS)) as f64,
            ) / 1e9,
            deflection_rate: ratio(noc.deflections as f64, noc.link_traversals as f64),
            halted_pes,
            faulted_pes,
            faults: sys.faults().to_vec(),
            console,
            console_bytes,
        },
        analytic: analytic_peaks(&cfg),
        pes,
        links,
    }
}
