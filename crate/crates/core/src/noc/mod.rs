//! Deflection-routed unidirectional 2D torus.
//!
//! Every router owns two input registers, one on its row ring (X, flowing
//! toward increasing x) and one on its column ring (Y, toward increasing y).
//! There are no buffers: a flit that cannot take its preferred output is
//! deflected along its X ring and tries again on the next lap.

mod flit;
mod router;

use serde::Serialize;
use thiserror::Error;

pub use flit::{Flit, CLIENT_INTERFACE_BITS, HEADER_BITS, LINK_BITS, PAYLOAD_BITS, PAYLOAD_BYTES};
pub use router::{route_select, RouteEvents, RouteOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("grid must have at least one row and one column (got {rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("grid of {rows}x{cols} exceeds the 256-row / 64-column limit")]
    TooLarge { rows: usize, cols: usize },
}

/// Torus shape: `rows` is the Y extent and `cols` the X extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    rows: usize,
    cols: usize,
}

impl Topology {
    pub const MAX_ROWS: usize = 256;
    pub const MAX_COLS: usize = 64;

    pub fn new(rows: usize, cols: usize) -> Result<Topology, TopologyError> {
        if rows == 0 || cols == 0 {
            return Err(TopologyError::Empty { rows, cols });
        }
        if rows > Self::MAX_ROWS || cols > Self::MAX_COLS {
            return Err(TopologyError::TooLarge { rows, cols });
        }
        Ok(Topology { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.cols + x
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.cols, index / self.cols)
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x < self.cols && y < self.rows
    }

    pub fn east(&self, index: usize) -> usize {
        let (x, y) = self.coords(index);
        self.index((x + 1) % self.cols, y)
    }

    pub fn south(&self, index: usize) -> usize {
        let (x, y) = self.coords(index);
        self.index(x, (y + 1) % self.rows)
    }

    pub(crate) fn all_cols_mask(&self) -> u64 {
        if self.cols == 64 {
            u64::MAX
        } else {
            (1u64 << self.cols) - 1
        }
    }

    /// Hops along the unidirectional rings from `src` to `dst`.
    pub fn hop_distance(&self, src: (usize, usize), dst: (usize, usize)) -> (usize, usize) {
        (
            (dst.0 + self.cols - src.0) % self.cols,
            (dst.1 + self.rows - src.1) % self.rows,
        )
    }

    /// Whether the link leaving `index` on the given ring crosses the bisection.
    ///
    /// The larger dimension is cut in half; each ring of that dimension then
    /// crosses the cut twice (mid-point and wrap-around).
    pub fn crosses_bisection(&self, index: usize, ring: Ring) -> bool {
        let (x, y) = self.coords(index);
        if self.rows >= self.cols {
            ring == Ring::Y && self.rows >= 2 && (y == self.rows / 2 - 1 || y == self.rows - 1)
        } else {
            ring == Ring::X && (x == self.cols / 2 - 1 || x == self.cols - 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ring {
    X,
    Y,
}

/// Running totals; `injected + spawned == consumed + in_flight` at every cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NocCounters {
    pub injected: u64,
    pub spawned: u64,
    pub consumed: u64,
    pub deliveries: u64,
    pub deflections: u64,
    pub turns: u64,
    pub refused_injections: u64,
    pub link_traversals: u64,
    pub bisection_traversals: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NocEventKind {
    Inject,
    Deflect,
    Turn,
    Deliver,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NocTraceRecord {
    pub cycle: u64,
    pub flit: u64,
    pub at: (u8, u8),
    pub src: (u8, u8),
    /// `None` for multicast.
    pub dest: Option<(u8, u8)>,
    pub event: NocEventKind,
}

impl NocTraceRecord {
    pub fn to_line(&self) -> String {
        let dest = match self.dest {
            Some((x, y)) => format!("{x},{y}"),
            None => "all".to_string(),
        };
        format!(
            "cycle={} noc=({},{}) event={} flit={} src={},{} dest={}",
            self.cycle,
            self.at.0,
            self.at.1,
            match self.event {
                NocEventKind::Inject => "inject",
                NocEventKind::Deflect => "deflect",
                NocEventKind::Turn => "turn",
                NocEventKind::Deliver => "deliver",
            },
            self.flit,
            self.src.0,
            self.src.1,
            dest
        )
    }
}

/// The whole network: ring registers, link counters and optional trace.
#[derive(Debug)]
pub struct Noc {
    topo: Topology,
    x_regs: Vec<Option<Flit>>,
    y_regs: Vec<Option<Flit>>,
    next_x: Vec<Option<Flit>>,
    next_y: Vec<Option<Flit>>,
    /// Flits sent per link; index `2 * router` is the X link leaving the
    /// router, `2 * router + 1` the Y link.
    link_flits: Vec<u64>,
    counters: NocCounters,
    cycle: u64,
    next_id: u64,
    trace: Option<Vec<NocTraceRecord>>,
}

impl Noc {
    pub fn new(topo: Topology) -> Noc {
        let n = topo.len();
        Noc {
            topo,
            x_regs: vec![None; n],
            y_regs: vec![None; n],
            next_x: vec![None; n],
            next_y: vec![None; n],
            link_flits: vec![0; 2 * n],
            counters: NocCounters::default(),
            cycle: 0,
            next_id: 1,
            trace: None,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn counters(&self) -> &NocCounters {
        &self.counters
    }

    pub fn link_flits(&self) -> &[u64] {
        &self.link_flits
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn set_tracing(&mut self, on: bool) {
        self.trace = on.then(Vec::new);
    }

    /// Drains buffered trace records.
    pub fn take_trace(&mut self) -> Vec<NocTraceRecord> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn in_flight(&self) -> u64 {
        (self.x_regs.iter().filter(|f| f.is_some()).count()
            + self.y_regs.iter().filter(|f| f.is_some()).count()) as u64
    }

    pub fn is_quiet(&self) -> bool {
        self.in_flight() == 0
    }

    /// Registered flits, X ring then Y ring, in router order.
    pub fn flits_in_flight(&self) -> impl Iterator<Item = &Flit> {
        self.x_regs.iter().chain(self.y_regs.iter()).flatten()
    }

    /// Advances the network by one cycle.
    ///
    /// `injections[r]` is the client flit offered at router `r`; it is taken
    /// (left `None`) when accepted and left in place when refused.
    /// `deliveries[r]` receives the flit ejected at router `r`, if any.
    pub fn step(&mut self, injections: &mut [Option<Flit>], deliveries: &mut [Option<Flit>]) {
        let n = self.topo.len();
        assert_eq!(injections.len(), n);
        assert_eq!(deliveries.len(), n);
        let cycle = self.cycle;

        for r in 0..n {
            let (x, y) = self.topo.coords(r);
            let (x8, y8) = (x as u8, y as u8);
            let x_in = self.x_regs[r].take();
            let y_in = self.y_regs[r].take();
            let mut client = injections[r].take();
            let mut fresh_id = false;
            if let Some(f) = client.as_mut() {
                if f.id == 0 {
                    f.id = self.next_id;
                    fresh_id = true;
                }
            }
            let client_id = client.as_ref().map(|f| f.id);

            let mut o = route_select(&self.topo, x8, y8, x_in, y_in, client);

            let ev = o.events;
            if ev.injected {
                self.counters.injected += 1;
                if fresh_id {
                    self.next_id += 1;
                }
            } else if let Some(f) = o.rejected.as_mut() {
                self.counters.refused_injections += 1;
                if fresh_id {
                    f.id = 0;
                }
            }
            self.counters.spawned += u64::from(ev.spawned);
            self.counters.consumed += u64::from(ev.consumed);
            self.counters.deflections += u64::from(ev.deflected);
            self.counters.turns += u64::from(ev.turned);

            if let Some(trace) = self.trace.as_mut() {
                let mut rec = |f: &Flit, event| {
                    trace.push(NocTraceRecord {
                        cycle,
                        flit: f.id,
                        at: (x8, y8),
                        src: (f.src_x, f.src_y),
                        dest: (!f.multicast).then_some((f.dest_x, f.dest_y)),
                        event,
                    })
                };
                if ev.injected {
                    let f = [&o.x_out, &o.y_out, &o.deliver]
                        .into_iter()
                        .flatten()
                        .find(|f| Some(f.id) == client_id);
                    if let Some(f) = f {
                        rec(f, NocEventKind::Inject);
                    }
                }
                if ev.deflected {
                    if let Some(f) = &o.x_out {
                        rec(f, NocEventKind::Deflect);
                    }
                }
                if ev.turned {
                    if let Some(f) = &o.y_out {
                        rec(f, NocEventKind::Turn);
                    }
                }
                if let Some(f) = &o.deliver {
                    rec(f, NocEventKind::Deliver);
                }
            }

            if let Some(f) = o.deliver {
                self.counters.deliveries += 1;
                deliveries[r] = Some(f);
            } else {
                deliveries[r] = None;
            }
            injections[r] = o.rejected;

            if let Some(mut f) = o.x_out {
                f.hop_count += 1;
                self.link_flits[2 * r] += 1;
                self.counters.link_traversals += 1;
                if self.topo.crosses_bisection(r, Ring::X) {
                    self.counters.bisection_traversals += 1;
                }
                self.next_x[self.topo.east(r)] = Some(f);
            }
            if let Some(mut f) = o.y_out {
                f.hop_count += 1;
                self.link_flits[2 * r + 1] += 1;
                self.counters.link_traversals += 1;
                if self.topo.crosses_bisection(r, Ring::Y) {
                    self.counters.bisection_traversals += 1;
                }
                self.next_y[self.topo.south(r)] = Some(f);
            }
        }

        std::mem::swap(&mut self.x_regs, &mut self.next_x);
        std::mem::swap(&mut self.y_regs, &mut self.next_y);
        self.cycle += 1;
    }
}
