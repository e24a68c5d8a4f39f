use super::{ExecEffect, Instr, PeConfig, SharedUnitKind};

/// Extra cycles a shifter or subword-unit operation holds the PE.
pub const SHIFTER_LATENCY: u32 = 1;
/// Extra cycles a multiply holds the PE.
pub const MULTIPLIER_LATENCY: u32 = 2;

/// Contention-free cycle occupancy of one instruction, split by cause.
///
/// The first cycle is the issue cycle in which the instruction retires; the
/// remaining fields are the cycles the PE stays busy afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Occupancy {
    pub flush: u32,
    pub load: u32,
    pub shared: u32,
}

impl Occupancy {
    pub fn total(&self) -> u32 {
        1 + self.flush + self.load + self.shared
    }

    pub fn extra(&self) -> u32 {
        self.flush + self.load + self.shared
    }
}

pub fn shared_latency(unit: SharedUnitKind) -> u32 {
    match unit {
        SharedUnitKind::Shifter | SharedUnitKind::Subword => SHIFTER_LATENCY,
        SharedUnitKind::Multiplier => MULTIPLIER_LATENCY,
    }
}

/// Cycle breakdown for `instr` given its effect.
///
/// A taken control transfer flushes the `stages - 1` younger pipeline slots.
/// A load holds the PE for `stages` cycles: issue plus data return, plus one
/// more behind the fetch latch of the 3-stage pipeline.
pub fn occupancy(instr: &Instr, effect: &ExecEffect, config: &PeConfig) -> Occupancy {
    let penalty = config.branch_penalty();
    Occupancy {
        flush: if effect.branch_taken { penalty } else { 0 },
        load: if instr.op.is_load() { penalty } else { 0 },
        shared: effect.shared_unit.map_or(0, shared_latency),
    }
}

pub fn timing_cost(instr: &Instr, effect: &ExecEffect, config: &PeConfig) -> u32 {
    occupancy(instr, effect, config).total()
}
